import math

import numpy as np
import pytest

from ptwide.activations import LINEAR, RELU, TANH
from ptwide.diagnostics import (ABS_SLACK, GramReport, active_fraction,
                                concentration_probe, feature_movement, gram,
                                gram_limit_mc, lemma1_monitor, pl_monitor,
                                shrink_interval, theory_constants)
from ptwide.embedding import EmbeddingSpec, EmbeddingWeights, build_embedding
from ptwide.errors import InvalidConfigError, StructuralError
from ptwide.model import NTK, OURS, ModelConfig, Parameters, forward, init_params
from ptwide.numkernel import RngStream
from ptwide.train import TrainConfig, run_training


def _identity_spec(d):
    return EmbeddingSpec(kind="identity", d=d, D=d)


class TestGram:
    def test_orthogonal_rows_give_identity(self):
        # rows of norm sqrt(d), mutually orthogonal: G = I
        X = 2.0 * np.eye(4)  # d = 4, ||x|| = 2 = sqrt(4)
        rep = gram(_identity_spec(4), EmbeddingWeights(), X)
        np.testing.assert_allclose(rep.G, np.eye(4), atol=1e-14)
        assert abs(rep.lambda_min - 1.0) < 1e-12
        assert rep.g_min == rep.g_max == 1.0

    def test_duplicate_rows_degenerate(self):
        X = np.vstack([np.ones(3), np.ones(3)])
        rep = gram(_identity_spec(3), EmbeddingWeights(), X)
        assert abs(rep.lambda_min) < 1e-10

    def test_quadratic_kind_label_and_value(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((5, 3))
        spec = EmbeddingSpec(kind="quadratic", d=3, D=9)
        rep = gram(spec, EmbeddingWeights(), X)
        assert rep.kind == "quadratic"
        G0 = X @ X.T / 3
        np.testing.assert_allclose(rep.G, G0 * G0, atol=1e-12)

    def test_psd_invariant(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((6, 8))
        spec = EmbeddingSpec(kind="random_feature", d=8, D=32,
                             activation=RELU, seed=1)
        rep = gram(spec, build_embedding(spec), X)
        assert rep.lambda_min >= -1e-9

    def test_json_round_trip_fields(self):
        import json
        X = np.eye(2) * math.sqrt(2)
        rep = gram(_identity_spec(2), EmbeddingWeights(), X)
        payload = json.loads(rep.to_json(dataset="unit"))
        assert payload["kind"] == "g0" and payload["dataset"] == "unit"
        assert payload["n"] == 2


def relu_closed_form_kernel(saa, sbb, sab):
    """Gaussian expectation of relu(u) relu(v): the arc-cosine formula."""
    denom = math.sqrt(saa * sbb)
    rho = min(1.0, max(-1.0, sab / denom))
    theta = math.acos(rho)
    return denom / (2.0 * math.pi) * (math.sin(theta)
                                      + (math.pi - theta) * math.cos(theta))


class TestGramLimitMc:
    def test_min_samples_enforced(self):
        with pytest.raises(InvalidConfigError):
            gram_limit_mc(RELU, np.ones((2, 2)), 10, seed=0)

    def test_linear_limit_is_base_gram(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((4, 6))
        rep = gram_limit_mc(LINEAR, X, 200_000, seed=2)
        G0 = X @ X.T / 6
        assert np.all(np.abs(rep.G - G0) <= 4.0 * rep.stderr + 1e-12)

    def test_relu_diagonal(self):
        # E relu(z.x/sqrt(d))^2 = ||x||^2 / (2d)
        rng = np.random.default_rng(6)
        X = rng.standard_normal((3, 5))
        rep = gram_limit_mc(RELU, X, 200_000, seed=3)
        for a in range(3):
            target = float(X[a] @ X[a]) / (2 * 5)
            assert abs(rep.G[a, a] - target) <= 4.0 * rep.stderr[a, a]

    def test_relu_orthogonal_off_diagonal(self):
        # orthogonal unit-energy inputs: closed form gives 1 / (2 pi)
        X = math.sqrt(2.0) * np.eye(2)
        rep = gram_limit_mc(RELU, X, 300_000, seed=4)
        assert abs(rep.G[0, 1] - 1.0 / (2.0 * math.pi)) <= 4.0 * rep.stderr[0, 1]

    def test_matches_closed_form_generic(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((4, 8))
        rep = gram_limit_mc(RELU, X, 200_000, seed=5)
        G0 = X @ X.T / 8
        for a in range(4):
            for b in range(4):
                target = relu_closed_form_kernel(G0[a, a], G0[b, b], G0[a, b])
                se = max(rep.stderr[a, b], 1e-12)
                assert abs(rep.G[a, b] - target) <= 4.0 * se

    def test_chunked_mean_is_plain_average(self):
        # estimate equals the average over the same draws computed by hand
        X = np.random.default_rng(8).standard_normal((3, 4))
        rep = gram_limit_mc(RELU, X, 2000, seed=9, chunk=500)
        gen = RngStream(9, "gram-mc").generator()
        s1 = np.zeros((3, 3))
        for _ in range(4):
            Z = gen.standard_normal((500, 4))
            A = np.maximum(Z @ X.T / 2.0, 0.0)
            s1 += (A[:, :, None] * A[:, None, :]).sum(axis=0)
        np.testing.assert_allclose(rep.G, 0.5 * (s1 / 2000 + (s1 / 2000).T),
                                   atol=1e-12)


class TestConcentrationProbe:
    def test_validation(self):
        X = np.ones((2, 2))
        with pytest.raises(InvalidConfigError):
            concentration_probe(RELU, X, [64, 32], trials=3, seed=0)
        with pytest.raises(InvalidConfigError):
            concentration_probe(RELU, X, [32, 64], trials=2, seed=0)

    def test_deviation_shrinks_with_width(self):
        X = np.random.default_rng(10).standard_normal((6, 6))
        ref = gram_limit_mc(RELU, X, 200_000, seed=1)
        rows = concentration_probe(RELU, X, [64, 1024], trials=3, seed=1,
                                   reference=ref)
        assert rows[0][1] > rows[1][1]


class TestActiveFraction:
    def test_all_inside(self):
        per_a, mn = active_fraction(np.zeros((5, 3)), (-1.0, 1.0))
        np.testing.assert_array_equal(per_a, np.ones(3))
        assert mn == 1.0

    def test_half_inside_construction(self):
        H = np.array([[0.0, 5.0], [5.0, 0.0], [0.0, 0.0], [5.0, 5.0]])
        per_a, mn = active_fraction(H, (-1.0, 1.0))
        np.testing.assert_array_equal(per_a, [0.5, 0.5])
        assert mn == 0.5

    def test_boundary_is_strict(self):
        per_a, _ = active_fraction(np.array([[1.0], [-1.0]]), (-1.0, 1.0))
        assert per_a[0] == 0.0

    def test_gaussian_mass(self):
        H = np.random.default_rng(14).standard_normal((20_000, 1))
        _, mn = active_fraction(H, (-1.0, 1.0))
        assert abs(mn - 0.6827) < 0.02

    def test_bad_interval(self):
        with pytest.raises(InvalidConfigError):
            active_fraction(np.zeros((2, 2)), (1.0, -1.0))


class TestShrinkInterval:
    def test_middle_third(self):
        assert shrink_interval((-1.0, 1.0)) == (-1.0 / 3.0, 1.0 / 3.0)
        assert shrink_interval((0.0, 3.0)) == (1.0, 2.0)


class TestTheoryConstants:
    def test_kappa_plugin(self):
        # lambda_max = lambda_min = k = 1, interval width 2: kappa = 9
        tc = theory_constants((-1.0, 1.0), 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
        assert abs(tc.kappa - 9.0) < 1e-12

    def test_k_const_plugin(self):
        # width 2, g_min = g_max = 1: K = 2 e^-1 / (6 sqrt(2 pi))
        tc = theory_constants((-1.0, 1.0), 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
        expected = 2.0 * math.exp(-1.0) / (6.0 * math.sqrt(2.0 * math.pi))
        assert abs(tc.k_const - expected) < 1e-12
        assert abs(expected - 0.04892) < 1e-4

    def test_rate_exponent_composition(self):
        tc = theory_constants((-1.0, 1.0), 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
        assert abs(tc.rate_exponent - 2.0 ** (1.0 / 3.0) * tc.k_const) < 1e-12

    def test_c_hat_doubling_quadruples_rate(self):
        base = theory_constants((-1.0, 1.0), 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
        big = theory_constants((-1.0, 1.0), 1.0, 1.0, 1.0, 1.0, 1.0, 2.0)
        assert abs(big.rate_exponent - 4.0 * base.rate_exponent) < 1e-12

    def test_kappa_monotone_in_lambda_max(self):
        lo = theory_constants((-1.0, 1.0), 1.0, 1.0, 0.5, 1.0, 1.0, 1.0)
        hi = theory_constants((-1.0, 1.0), 1.0, 1.0, 0.5, 2.0, 1.0, 1.0)
        assert hi.kappa > lo.kappa

    def test_degenerate_spectrum(self):
        tc = theory_constants((-1.0, 1.0), 1.0, 1.0, 0.0, 1.0, 1.0, 1.0)
        assert tc.degenerate and math.isnan(tc.kappa)


class TestLemma1Monitor:
    def _trace(self, d=6, m=64, steps=100, delta=0.05, seed=0):
        # n < d keeps the base Gram strictly positive definite
        cfg = ModelConfig(embedding=_identity_spec(d), activation=TANH,
                          scaling=OURS, m=m, seed=seed)
        rng = np.random.default_rng(seed + 100)
        X = rng.standard_normal((3, d))
        y = rng.uniform(-0.5, 0.5, 3)
        trace = run_training(cfg, TrainConfig(steps=steps, delta=delta), X, y)
        rep = gram(_identity_spec(d), EmbeddingWeights(), X)
        tc = theory_constants(TANH.active_region, rep.g_min, rep.g_max,
                              rep.lambda_min, rep.lambda_max, TANH.k_deriv, 1.0)
        return trace, tc

    def test_zero_step_trace_passes(self):
        # at the initial point the bound reduces to eta^1.5 >= eta~^1.5,
        # which holds because the shrunk interval is a subset
        trace, tc = self._trace(steps=0)
        result = lemma1_monitor(trace, tc, 1.0)
        assert result.passed and result.worst_margin >= -ABS_SLACK

    def test_training_trace_passes(self):
        trace, tc = self._trace()
        result = lemma1_monitor(trace, tc, 1.0)
        assert result.passed
        assert len(result.margins) == len(trace.steps)

    def test_empty_trace_rejected(self):
        trace, tc = self._trace(steps=0)
        trace.eta_min = []
        with pytest.raises(InvalidConfigError):
            lemma1_monitor(trace, tc, 1.0)


class TestPlMonitor:
    def _setup(self, n, d=4, m=8, seed=0):
        cfg = ModelConfig(embedding=_identity_spec(d), activation=TANH,
                          scaling=OURS, m=m, seed=seed)
        params = init_params(cfg)
        rng = np.random.default_rng(seed + 50)
        X, y = rng.standard_normal((n, d)), rng.standard_normal(n)
        rep = gram(_identity_spec(d), EmbeddingWeights(), X)
        return cfg, params, X, y, rep

    def test_zero_residual_gives_zeros(self):
        cfg, params, X, _, rep = self._setup(3)
        y = forward(cfg, params, X).f
        out = pl_monitor(cfg, params, X, y, rep)
        assert out.exact_dldt == 0.0 and out.bound == 0.0 and out.passed

    def test_single_point_equality(self):
        # n = 1: G is the scalar g and lambda_min = g, so exact == bound
        cfg, params, X, y, rep = self._setup(1)
        out = pl_monitor(cfg, params, X, y, rep)
        assert abs(out.exact_dldt - out.bound) < 1e-12 * max(1.0, abs(out.bound))
        assert out.passed

    def test_inequality_chain(self):
        cfg, params, X, y, rep = self._setup(5)
        out = pl_monitor(cfg, params, X, y, rep)
        assert out.passed
        assert out.exact_dldt <= out.bound + 1e-9
        assert out.bound <= 1e-9

    def test_exact_matches_euler_difference(self):
        # exact_dldt is dL/dt under gradient flow; a tiny GD step with the
        # ours scaling integrates it, so (L1 - L0) / delta matches to O(delta)
        from ptwide.train import gd_step, grad_W, loss
        cfg, params, X, y, rep = self._setup(4, seed=3)
        out = pl_monitor(cfg, params, X, y, rep)
        state = forward(cfg, params, X, y)
        l0 = 0.5 * float(state.residual @ state.residual)
        delta = 1e-7
        stepped = gd_step(cfg, params, grad_W(cfg, params, X, y, state), delta)
        l1 = loss(forward(cfg, stepped, X).f, y)
        fd = (l1 - l0) / delta
        assert abs(fd - out.exact_dldt) < 1e-4 * max(1.0, abs(out.exact_dldt))


class TestFeatureMovement:
    def test_zero_for_identical(self):
        H = np.random.default_rng(0).standard_normal((4, 3))
        np.testing.assert_array_equal(feature_movement(H, H), np.zeros(3))

    def test_hand_value(self):
        Ha = np.zeros((2, 2))
        Hb = np.array([[1.0, -2.0], [3.0, 0.0]])
        np.testing.assert_array_equal(feature_movement(Ha, Hb), [2.0, 1.0])

    def test_shape_mismatch(self):
        with pytest.raises(StructuralError):
            feature_movement(np.zeros((2, 2)), np.zeros((3, 2)))
