"""Command-line interface.

Verbs: train, experiment, gram, concentration, gen-data. Each takes a JSON
config via --config and an output directory via --out; --seed overrides the
config seed(s). Exit code is 0 iff all inequality monitors pass (or
--no-strict is given). Floats are printed with 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import datasets, harness
from .activations import get_activation
from .diagnostics import concentration_probe, gram, gram_limit_mc
from .embedding import EmbeddingSpec, build_embedding
from .errors import InvalidConfigError, PtwideError


def _load_config(path: str, allowed: set[str]) -> dict:
    with open(path) as fh:
        raw = json.load(fh)
    unknown = set(raw) - allowed
    if unknown:
        raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
    return raw


def _fmt(v: float) -> str:
    return "%.17g" % v


def _dataset_from_config(raw: dict, seed_override: int | None):
    seed = seed_override if seed_override is not None else raw.get("seed", 0)
    return harness._generate(raw["dataset"], raw["n"], raw["d"], seed,
                             raw.get("split", "train"), raw.get("teacher_seed", 999))


def cmd_experiment(args) -> int:
    raw = _load_config(args.config, harness._ALLOWED_KEYS)
    cfg = harness.parse_experiment_config(raw)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    artifact = harness.run_experiment(cfg, out_dir=args.out)
    ok = True
    for row in artifact.summary:
        print(",".join(harness._fmt(row[c]) for c in harness.SUMMARY_COLUMNS))
        if row["lemma1_pass"] is False or row["pl_pass"] is False:
            ok = False
    return 0 if ok or args.no_strict else 1


def cmd_train(args) -> int:
    raw = _load_config(args.config, harness._ALLOWED_KEYS)
    cfg = harness.parse_experiment_config(raw)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    result = harness.run_single(cfg, cfg.scalings[0], cfg.n_list[0], cfg.seeds[0])
    os.makedirs(args.out, exist_ok=True)
    from .train import snapshots_to_npz, trace_to_csv
    trace_to_csv(result.trace, os.path.join(args.out, "trace.csv"))
    if result.trace.snapshots:
        snapshots_to_npz(result.trace, os.path.join(args.out, "snapshots.npz"))
    harness.write_summary([result.row], os.path.join(args.out, "summary.csv"))
    for col in harness.SUMMARY_COLUMNS:
        print(f"{col}: {harness._fmt(result.row[col])}")
    ok = result.row["lemma1_pass"] is not False and result.row["pl_pass"] is not False
    return 0 if ok or args.no_strict else 1


_GRAM_KEYS = {"dataset", "n", "d", "seed", "split", "teacher_seed",
              "embedding", "D", "depth", "activation", "embedding_seed",
              "mc_samples"}


def cmd_gram(args) -> int:
    raw = _load_config(args.config, _GRAM_KEYS)
    data = _dataset_from_config(raw, args.seed)
    activation = get_activation(raw.get("activation", "relu"))
    kind = raw.get("embedding", "identity")
    d = raw["d"]
    if raw.get("mc_samples"):
        report = gram_limit_mc(activation, data.X, int(raw["mc_samples"]),
                               raw.get("embedding_seed", 0))
    else:
        if kind == "identity":
            spec = EmbeddingSpec(kind="identity", d=d, D=d)
        elif kind == "quadratic":
            spec = EmbeddingSpec(kind="quadratic", d=d, D=d * d)
        else:
            spec = EmbeddingSpec(kind=kind, d=d, D=int(raw.get("D", d)),
                                 depth=int(raw.get("depth", 0)),
                                 activation=activation,
                                 seed=int(raw.get("embedding_seed", 0)))
        report = gram(spec, build_embedding(spec), data.X)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "gram.json")
    with open(out_path, "w") as fh:
        fh.write(report.to_json(dataset=raw["dataset"], seed=data.seed))
    print(f"lambda_min: {_fmt(report.lambda_min)}")
    print(f"lambda_max: {_fmt(report.lambda_max)}")
    print(f"g_min: {_fmt(report.g_min)}")
    print(f"g_max: {_fmt(report.g_max)}")
    print(f"wrote {out_path}")
    return 0


_CONC_KEYS = {"dataset", "n", "d", "seed", "split", "teacher_seed",
              "activation", "D_list", "trials", "mc_samples"}


def cmd_concentration(args) -> int:
    raw = _load_config(args.config, _CONC_KEYS)
    data = _dataset_from_config(raw, args.seed)
    activation = get_activation(raw.get("activation", "relu"))
    rows = concentration_probe(activation, data.X, list(raw["D_list"]),
                               int(raw.get("trials", 5)),
                               int(raw.get("seed", 0)),
                               reference_samples=int(raw.get("mc_samples", 1_000_000)))
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "concentration.csv")
    with open(out_path, "w") as fh:
        fh.write("D,median_spectral_deviation\n")
        for D, dev in rows:
            fh.write(f"{D},{_fmt(dev)}\n")
            print(f"D={D}: {_fmt(dev)}")
    print(f"wrote {out_path}")
    return 0


_GEN_KEYS = {"dataset", "n", "d", "seed", "split", "teacher_seed"}


def cmd_gen_data(args) -> int:
    raw = _load_config(args.config, _GEN_KEYS)
    data = _dataset_from_config(raw, args.seed)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, f"{data.kind}_{data.split}.csv")
    datasets.to_csv(data, out_path)
    print(f"wrote {out_path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ptwide")
    sub = parser.add_subparsers(dest="verb", required=True)
    handlers = {
        "train": cmd_train,
        "experiment": cmd_experiment,
        "gram": cmd_gram,
        "concentration": cmd_concentration,
        "gen-data": cmd_gen_data,
    }
    for verb in handlers:
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default="out")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--no-strict", action="store_true")
    args = parser.parse_args(argv)
    try:
        return handlers[args.verb](args)
    except PtwideError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
