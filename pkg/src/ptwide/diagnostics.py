"""Theory quantities computed from data, parameters and traces.

Covers the Gram matrices and their spectra, Monte-Carlo limit estimates,
concentration probes, active-region fractions, the derived rate constants,
and the inequality monitors used as runtime checks during experiments.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationSpec
from .embedding import EmbeddingSpec, EmbeddingWeights, build_embedding, embed_batch
from .errors import InvalidConfigError, StructuralError
from .model import ModelConfig, Parameters, forward
from .numkernel import RngStream, sym_eig_extremes

# Slack applied to all inequality monitors: float accumulation over m*n terms.
ABS_SLACK = 1e-8
REL_SLACK = 1e-6

_KIND_BY_EMBEDDING = {
    "identity": "g0",
    "random_feature": "g1",
    "quadratic": "quadratic",
    "deep_random": "deep",
}


@dataclass(frozen=True)
class GramReport:
    G: np.ndarray
    lambda_min: float
    lambda_max: float
    g_min: float           # min diagonal entry
    g_max: float           # max diagonal entry
    kind: str              # g0 | g1 | quadratic | deep | limit_mc
    mc_samples: int = 0
    stderr: np.ndarray | None = None

    def to_json(self, **extra) -> str:
        payload = {
            "kind": self.kind,
            "n": int(self.G.shape[0]),
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "g_min": self.g_min,
            "g_max": self.g_max,
            "mc_samples": self.mc_samples,
            "G": self.G.tolist(),
            **extra,
        }
        return json.dumps(payload, indent=2)


@dataclass(frozen=True)
class TheoryConstants:
    kappa: float
    k_const: float
    rate_exponent: float
    interval_used: tuple[float, float]
    degenerate: bool = False


def _report_from_gram(G: np.ndarray, kind: str, mc_samples: int = 0,
                      stderr: np.ndarray | None = None) -> GramReport:
    G = 0.5 * (G + G.T)  # enforce exact symmetry before the eigensolver
    lo, hi = sym_eig_extremes(G)
    diag = np.diag(G)
    return GramReport(G=G, lambda_min=lo, lambda_max=hi,
                      g_min=float(diag.min()), g_max=float(diag.max()),
                      kind=kind, mc_samples=mc_samples, stderr=stderr)


def gram(spec: EmbeddingSpec, weights: EmbeddingWeights, X: np.ndarray) -> GramReport:
    """Empirical Gram matrix G_ab = (1/D) Phi(x_a)^T Phi(x_b) with extremes."""
    Phi = embed_batch(spec, weights, X)
    G = Phi @ Phi.T / spec.D
    return _report_from_gram(G, _KIND_BY_EMBEDDING[spec.kind])


def gram_limit_mc(activation: ActivationSpec, X: np.ndarray, samples: int,
                  seed: int, chunk: int = 100_000) -> GramReport:
    """Monte-Carlo estimate of the infinite-width Gram limit.

    Averages sigma(z.x_a/sqrt(d)) sigma(z.x_b/sqrt(d)) over i.i.d. standard
    Gaussian z. Accumulates first and second moments in chunks so that very
    large sample counts stay within memory; a standard-error matrix is
    attached to the report.
    """
    if samples < 1000:
        raise InvalidConfigError("gram_limit_mc requires samples >= 1000")
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    gen = RngStream(seed, "gram-mc").generator()
    s1 = np.zeros((n, n))
    s2 = np.zeros((n, n))
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        Z = gen.standard_normal((k, d))
        A = activation.fn(Z @ X.T / math.sqrt(d))          # (k, n)
        prods = A[:, :, None] * A[:, None, :]              # (k, n, n)
        s1 += prods.sum(axis=0)
        s2 += (prods * prods).sum(axis=0)
        done += k
    mean = s1 / samples
    var = np.maximum(s2 / samples - mean * mean, 0.0)
    stderr = np.sqrt(var / samples)
    rep = _report_from_gram(mean, "limit_mc", mc_samples=samples)
    return GramReport(G=rep.G, lambda_min=rep.lambda_min, lambda_max=rep.lambda_max,
                      g_min=rep.g_min, g_max=rep.g_max, kind="limit_mc",
                      mc_samples=samples, stderr=stderr)


def concentration_probe(activation: ActivationSpec, X: np.ndarray,
                        D_list: list[int], trials: int, seed: int,
                        reference: GramReport | None = None,
                        reference_samples: int = 1_000_000) -> list[tuple[int, float]]:
    """Median spectral deviation of the finite-D Gram from the MC limit.

    For each D, draws fresh random-feature weights ``trials`` times and
    measures ||G - G_limit||_2 against a high-sample MC reference.
    """
    if sorted(D_list) != list(D_list):
        raise InvalidConfigError("D_list must be ascending")
    if trials < 3:
        raise InvalidConfigError("trials must be >= 3")
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    if reference is None:
        reference = gram_limit_mc(activation, X, reference_samples, seed)
    Gbar = reference.G
    rows = []
    for D in D_list:
        devs = []
        for t in range(trials):
            spec = EmbeddingSpec(kind="random_feature", d=d, D=D,
                                 activation=activation, seed=seed * 10_000 + D * 100 + t)
            rep = gram(spec, build_embedding(spec), X)
            diff = rep.G - Gbar
            lo, hi = sym_eig_extremes(diff)
            devs.append(max(abs(lo), abs(hi)))
        rows.append((D, float(np.median(devs))))
    return rows


def shrink_interval(interval: tuple[float, float]) -> tuple[float, float]:
    """Middle third of an interval, used for the initialization fraction."""
    lo, hi = interval
    return ((2 * lo + hi) / 3.0, (lo + 2 * hi) / 3.0)


def active_fraction(H: np.ndarray, interval: tuple[float, float]) -> tuple[np.ndarray, float]:
    """Per-data-point fraction of neurons with pre-activation inside interval.

    Returns the n-vector of fractions and its minimum over data points.
    """
    lo, hi = interval
    if lo >= hi:
        raise InvalidConfigError(f"interval must satisfy I_l < I_r, got {interval}")
    inside = (H > lo) & (H < hi)
    per_a = inside.mean(axis=0)
    return per_a, float(per_a.min())


def theory_constants(interval: tuple[float, float], g_min: float, g_max: float,
                     lambda_min: float, lambda_max: float,
                     k_sigma_prime: float, c_hat: float) -> TheoryConstants:
    """Derived constants: kappa, the init-fraction constant K, and the rate exponent.

    The K exponent is max(|I_l|, |I_r|) / lambda_1^2 with lambda_1 = g_min
    and lambda_2 = g_max.
    """
    lo, hi = interval
    if lambda_min <= 0:
        return TheoryConstants(kappa=float("nan"), k_const=float("nan"),
                               rate_exponent=float("nan"), interval_used=interval,
                               degenerate=True)
    kappa = 9.0 * lambda_max * (hi - lo) / (2.0 * lambda_min * k_sigma_prime)
    k_const = (hi - lo) / (6.0 * math.sqrt(2.0 * math.pi) * g_max) * math.exp(
        -max(abs(lo), abs(hi)) / (g_min ** 2))
    rate_exponent = 2.0 ** (1.0 / 3.0) * lambda_min * k_sigma_prime ** 2 * k_const * c_hat ** 2
    return TheoryConstants(kappa=kappa, k_const=k_const,
                           rate_exponent=rate_exponent, interval_used=interval)


@dataclass
class MonitorResult:
    passed: bool
    worst_margin: float
    margins: list[float] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)

    def to_json(self, **extra) -> str:
        return json.dumps({
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "steps": self.steps,
            "margins": self.margins,
            "abs_slack": ABS_SLACK,
            "rel_slack": REL_SLACK,
            **extra,
        }, indent=2)


def lemma1_monitor(trace, constants: TheoryConstants, c_hat: float) -> MonitorResult:
    """Active-fraction lower bound along a trace.

    Checks (eta^t)^(3/2) >= (eta~0)^(3/2) - kappa (sqrt(L0) - sqrt(Lt)) / c_hat
    at every recorded step, with the monitor slack.
    """
    if not trace.eta_min:
        raise InvalidConfigError("trace has no recorded active fractions")
    l0 = trace.losses[0]
    base = trace.eta_tilde0 ** 1.5
    margins = []
    ok = True
    for eta, lt in zip(trace.eta_min, trace.losses):
        rhs = base - constants.kappa * (math.sqrt(l0) - math.sqrt(lt)) / c_hat
        margin = eta ** 1.5 - rhs
        margins.append(float(margin))
        if margin < -(ABS_SLACK + REL_SLACK * abs(rhs)):
            ok = False
    return MonitorResult(passed=ok, worst_margin=float(min(margins)),
                         margins=margins, steps=list(trace.steps))


@dataclass(frozen=True)
class PLReport:
    exact_dldt: float
    bound: float
    passed: bool


def pl_monitor(config: ModelConfig, params: Parameters, X: np.ndarray,
               y: np.ndarray, gram_report: GramReport) -> PLReport:
    """Loss-derivative chain at a parameter point.

    exact = -(c^2/m) sum_i s_i^T G s_i with s_i[a] = r_a sigma'(h_ia);
    bound = -(c^2 lambda_min / m) sum_ia s_ia^2. The inequality
    exact <= bound <= 0 is algebraic at any parameter point.
    """
    state = forward(config, params, X, y)
    S = config.activation.deriv(state.H) * state.residual[None, :]   # (m, n)
    c2 = params.c_hat ** 2
    exact = -(c2 / config.m) * float(np.sum((S @ gram_report.G) * S))
    bound = -(c2 * gram_report.lambda_min / config.m) * float(np.sum(S * S))
    slack = ABS_SLACK + REL_SLACK * abs(bound)
    passed = (exact <= bound + slack) and (bound <= slack)
    return PLReport(exact_dldt=exact, bound=bound, passed=passed)


def feature_movement(H_a: np.ndarray, H_b: np.ndarray) -> np.ndarray:
    """Columnwise mean absolute pre-activation difference (1/m) sum_i |dh_i|."""
    if H_a.shape != H_b.shape:
        raise StructuralError(f"shape mismatch: {H_a.shape} vs {H_b.shape}")
    return np.abs(H_a - H_b).mean(axis=0)
