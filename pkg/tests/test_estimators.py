import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import klsmooth as k
from klsmooth import EstimatorSpec, ValidationError
from klsmooth.estimators import bound_info, default_bounds_for_spec, smoothed_probs

from conftest import random_prob_vector

# Every registered right-hand side locked against an independently
# hand-computed value at a point that discriminates its terms (for the
# adaptive pair, delta = e^-30 separates loglog(1/delta) from log d).
REGISTRY_LOCK_CASES = [
    ("expectation_laplace", {"n": 1000, "d": 10}, 0.008950830520084578),
    ("laplace_whp", {"n": 1000, "d": 10, "delta": math.exp(-30)}, 12323.951359485112),
    ("conf_whp", {"n": 1000, "d": 10, "delta": math.exp(-30)}, 8698.530806880352),
    ("adaptive_expectation",
     {"n": 1000, "d": 10, "s_n": 2.5, "s_circ_half": 0.8}, 0.011629536294598609),
    ("adaptive_whp",
     {"n": 1000, "d": 10, "delta": math.exp(-30), "s_n": 2.5, "s_circ_112": 0.8},
     12879.839789590029),
    ("adaptive_conf_whp",
     {"n": 1000, "d": 10, "delta": math.exp(-30), "s_n": 2.5, "s_circ_112": 0.8},
     8891.877181724793),
    ("missing_mass_whp",
     {"n": 1000, "delta": math.exp(-30), "s_circ_112": 0.8}, 204.13993713442838),
    ("missing_mass_subgaussian",
     {"n": 400, "delta": 0.01, "expected_missing": 0.031}, 0.13829830131446735),
    ("missing_mass_bernstein",
     {"n": 400, "delta": 0.01, "expected_missing": 0.031, "d_n_plus": 7.5},
     0.06329115216833411),
    ("reverse_kl_types", {"n": 200, "d": 10, "delta": 0.01}, 0.28819109633289425),
    ("reverse_kl_linear", {"n": 200, "d": 10, "delta": 0.01}, 0.4381551055796427),
    ("hellinger_whp", {"n": 500, "delta": 0.01, "s_n": 12.5}, 0.1644723826038333),
    ("lower_confidence_independent",
     {"n": 4000, "d": 4000, "delta": math.exp(-17)}, 0.00020240823134244778),
    ("lower_minimax", {"n": 5000, "d": 5000, "delta": math.exp(-5)}, 0.00020170343863828326),
    ("lower_sparse_highprob", {"n": 600, "d": 550, "s": 5}, 0.00015834667682756713),
    ("lower_sparse_tail",
     {"n": 600, "d": 550, "s": 5, "delta": math.exp(-5)}, 0.00031277079802132635),
    ("construction_conf_indep", {"n": 4000, "delta": math.exp(-17)}, 0.001204115671223892),
    ("construction_two_point",
     {"n": 4000, "d": 4000, "delta": math.exp(-17)}, 0.0025178364978881156),
]


class TestCountVector:
    def test_basic(self):
        cv = k.count_vector([2, 1, 0])
        assert cv.n == 3 and cv.d == 3 and cv.distinct == 2

    @pytest.mark.parametrize("bad", [[1], [1, -1], [0.5, 0.5]])
    def test_rejects(self, bad):
        with pytest.raises(ValidationError):
            k.count_vector(bad)

    def test_accepts_integral_floats(self):
        assert k.count_vector([2.0, 3.0]).n == 5


class TestEstimatorSpec:
    @pytest.mark.parametrize("text", [
        "mle", "laplace", "kt", "add:0.25", "conf:0.01", "adaptive", "adaptive-conf:0.001",
    ])
    def test_parse_str_round_trip(self, text):
        spec = EstimatorSpec.parse(text)
        assert EstimatorSpec.parse(str(spec)) == spec

    @pytest.mark.parametrize("bad", [
        "good-turing", "add:-1", "add:0", "conf:2", "conf:", "laplace:3", "adaptive-conf:0",
    ])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValidationError):
            EstimatorSpec.parse(bad)

    def test_constructors_validate(self):
        with pytest.raises(ValidationError):
            EstimatorSpec("laplace", lam=1.0)
        with pytest.raises(ValidationError):
            EstimatorSpec("adaptive", delta=0.1)


class TestSmoothingLevel:
    def test_fixed_rules(self):
        assert k.smoothing_level(EstimatorSpec.laplace(), 3, 10) == 1.0
        assert k.smoothing_level(EstimatorSpec.krichevsky_trofimov(), 3, 10) == 0.5
        assert k.smoothing_level(EstimatorSpec.add_constant(0.7), 3, 10) == 0.7

    def test_confidence_dependent(self):
        spec = EstimatorSpec.conf_dependent(math.exp(-30))
        assert k.smoothing_level(spec, 0, 10) == pytest.approx(3.0, rel=1e-14)
        mild = EstimatorSpec.conf_dependent(0.1)
        assert k.smoothing_level(mild, 0, 10) == 1.0

    def test_adaptive(self):
        assert k.smoothing_level(EstimatorSpec.adaptive(), 3, 10) == pytest.approx(0.3)

    def test_adaptive_conf(self):
        spec = EstimatorSpec.adaptive_conf(math.exp(-2))
        assert k.smoothing_level(spec, 5, 10) == pytest.approx(0.5)

    def test_mle_has_no_level(self):
        with pytest.raises(ValidationError):
            k.smoothing_level(EstimatorSpec.mle(), 3, 10)

    def test_adaptive_needs_observations(self):
        with pytest.raises(ValidationError):
            k.smoothing_level(EstimatorSpec.adaptive(), 0, 10)

    def test_distinct_cannot_exceed_d(self):
        with pytest.raises(ValidationError):
            k.smoothing_level(EstimatorSpec.laplace(), 11, 10)


class TestEstimate:
    def test_add_one(self):
        pv = k.estimate(EstimatorSpec.laplace(), k.count_vector([2, 1, 0]))
        np.testing.assert_allclose(pv.probs, [3 / 6, 2 / 6, 1 / 6], rtol=1e-15)

    def test_empirical(self):
        pv = k.estimate(EstimatorSpec.mle(), k.count_vector([2, 1, 0]))
        np.testing.assert_allclose(pv.probs, [2 / 3, 1 / 3, 0.0], rtol=1e-15)

    def test_adaptive_example(self):
        pv = k.estimate(EstimatorSpec.adaptive(), k.count_vector([4, 0]))
        np.testing.assert_allclose(pv.probs, [0.9, 0.1], rtol=1e-14)

    def test_empty_sample_rejected(self):
        with pytest.raises(ValidationError):
            k.estimate(EstimatorSpec.laplace(), k.count_vector([0, 0]))

    @given(st.integers(0, 5_000))
    def test_smoothed_estimates_strictly_positive(self, seed):
        g = np.random.default_rng(seed)
        d = int(g.integers(2, 12))
        counts = k.count_vector(g.multinomial(int(g.integers(1, 50)), g.dirichlet(np.ones(d))))
        for spec in (EstimatorSpec.laplace(), EstimatorSpec.krichevsky_trofimov(),
                     EstimatorSpec.add_constant(0.1), EstimatorSpec.conf_dependent(0.05),
                     EstimatorSpec.adaptive(), EstimatorSpec.adaptive_conf(0.01)):
            est = k.estimate(spec, counts)
            assert np.all(est.probs > 0)

    @given(st.integers(0, 5_000))
    def test_permutation_equivariance(self, seed):
        g = np.random.default_rng(seed)
        d = int(g.integers(2, 10))
        counts = g.multinomial(int(g.integers(1, 40)), g.dirichlet(np.ones(d)))
        perm = g.permutation(d)
        for text in ("mle", "laplace", "adaptive", "conf:0.02"):
            spec = EstimatorSpec.parse(text)
            direct = k.estimate(spec, k.count_vector(counts[perm])).probs
            permuted = k.estimate(spec, k.count_vector(counts)).probs[perm]
            np.testing.assert_allclose(direct, permuted, rtol=1e-14)

    def test_deterministic_divergence_envelopes(self, rng):
        # add-one stays within log(2n) whenever d <= n; the confidence rule
        # stays within log(7d) whenever delta <= e^(-n/6)
        for _ in range(300):
            d = int(rng.integers(2, 10))
            n = int(rng.integers(d, 60))
            pv = random_prob_vector(rng, d=d)
            counts = k.count_vector(rng.multinomial(n, rng.dirichlet(np.ones(d))))
            lap = k.estimate(EstimatorSpec.laplace(), counts)
            assert k.kl_divergence(pv, lap) <= math.log(2 * n) + 1e-12
            delta = math.exp(-n / 6.0) * rng.uniform(0.05, 1.0)
            conf = k.estimate(EstimatorSpec.conf_dependent(delta), counts)
            assert k.kl_divergence(pv, conf) <= math.log(7 * d) + 1e-12


class TestRiskDecomposition:
    def test_proportional_counts_leave_only_bias(self):
        pv = k.make_prob_vector([0.5, 0.5])
        dec = k.risk_decomposition(pv, k.count_vector([2, 2]), lam=2.0)
        assert dec.hellinger_term == 0.0
        assert dec.residual_term == 0.0
        assert dec.bias_term == pytest.approx(7.0)

    def test_gate_excludes_moderate_classes(self):
        pv = k.make_prob_vector([0.5, 0.5])
        dec = k.risk_decomposition(pv, k.count_vector([4, 0]), lam=1.0)
        assert dec.residual_term == 0.0  # 0.5 < 4*lam/n = 1

    def test_residual_hand_value(self):
        pv = k.make_prob_vector([0.5, 0.5])
        dec = k.risk_decomposition(pv, k.count_vector([8, 0]), lam=1.0)
        assert dec.residual_term == pytest.approx(0.5 * math.log(8.0), rel=1e-14)

    def test_lambda_range(self):
        pv = k.make_prob_vector([0.5, 0.5])
        cv = k.count_vector([2, 2])
        for bad in (0.0, -1.0, 2.0 + 1e-9):
            with pytest.raises(ValidationError):
                k.risk_decomposition(pv, cv, bad)

    def test_bounds_divergence(self, rng):
        # the three terms dominate the divergence of the add-lambda estimate
        for _ in range(400):
            d = int(rng.integers(2, 9))
            n = int(rng.integers(d, 80))
            pv = random_prob_vector(rng, d=d)
            counts = rng.multinomial(n, rng.dirichlet(np.ones(d)))
            lam = float(rng.uniform(1e-6, 1.0)) * n / d
            dec = k.risk_decomposition(pv, k.count_vector(counts), lam)
            est = (counts + lam) / (n + lam * d)
            assert k.kl_divergence(pv, est) <= dec.total + 1e-10


class TestBoundRegistry:
    def test_expectation_laplace_value(self):
        res = k.bound_value("expectation_laplace", {"n": 2, "d": 2})
        assert res.value == pytest.approx(math.log(1 + 1 / 3), rel=1e-14)
        assert res.warnings == ()

    def test_expectation_laplace_below_linear_rate(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 10_000))
            d = int(rng.integers(2, 10_000))
            val = k.bound_value("expectation_laplace", {"n": n, "d": d}).value
            assert val <= d / n + 1e-12

    def test_laplace_whp_value(self):
        res = k.bound_value("laplace_whp", {"n": 1000, "d": 10, "delta": math.exp(-3)})
        assert res.value == pytest.approx(110000 * (10 + 3 * math.log(3)) / 1000, rel=1e-12)
        assert res.warnings == ()

    def test_missing_mass_whp_echo(self):
        s_circ = 4.2
        res = k.bound_value("missing_mass_whp", {"n": 1120, "delta": math.exp(-1.0001), "s_circ_112": s_circ})
        want = (336 * s_circ + 2500 * math.e * 1.0001) / 1120
        assert res.value == pytest.approx(want, rel=1e-12)

    def test_param_schema_errors(self):
        with pytest.raises(ValidationError, match="missing"):
            k.bound_value("laplace_whp", {"n": 100, "d": 5})
        with pytest.raises(ValidationError, match="unexpected"):
            k.bound_value("laplace_whp", {"n": 100, "d": 5, "delta": 0.01, "s": 3})
        with pytest.raises(ValidationError, match="unknown bound id"):
            k.bound_value("nope", {})

    def test_out_of_validity_warns_but_returns(self):
        res = k.bound_value("laplace_whp", {"n": 4, "d": 5, "delta": 0.4})
        assert res.value > 0
        assert any("n = 4" in w for w in res.warnings)
        assert any("delta" in w for w in res.warnings)

    def test_lower_bound_formulas(self):
        n, d, delta = 5000, 5000, math.exp(-5)
        res = k.bound_value("lower_minimax", {"n": n, "d": d, "delta": delta})
        assert res.value == pytest.approx((d + math.log(d) * 5) / (5000 * n), rel=1e-12)
        res = k.bound_value("construction_two_point", {"n": n, "d": d, "delta": delta})
        assert res.value == pytest.approx(math.log(d) * 5 / (14 * n), rel=1e-12)

    def test_adaptive_expectation_zero_weight(self):
        res = k.bound_value("adaptive_expectation", {"n": 10, "d": 5, "s_n": 1.0, "s_circ_half": 0.0})
        assert res.value == pytest.approx(2.4 / 11, rel=1e-14)

    def test_registry_enumeration(self):
        ids = k.bound_ids()
        assert "laplace_whp" in ids and "missing_mass_whp" in ids
        for bid in ids:
            info = bound_info(bid)
            assert info.multiplier >= 1

    def test_multipliers_recorded_per_bound(self):
        assert bound_info("laplace_whp").multiplier == 4
        assert bound_info("conf_whp").multiplier == 4
        assert bound_info("adaptive_whp").multiplier == 14
        assert bound_info("adaptive_conf_whp").multiplier == 14
        assert bound_info("missing_mass_whp").multiplier == 8
        assert bound_info("hellinger_whp").multiplier == 2
        for bid in ("reverse_kl_types", "reverse_kl_linear",
                    "missing_mass_subgaussian", "missing_mass_bernstein"):
            assert bound_info(bid).multiplier == 1

    def test_default_bounds(self):
        assert default_bounds_for_spec(EstimatorSpec.laplace()) == ("laplace_whp",)
        assert default_bounds_for_spec(EstimatorSpec.adaptive()) == ("adaptive_whp",)

    @pytest.mark.parametrize("bound_id,params,expected", REGISTRY_LOCK_CASES)
    def test_registry_locked_values(self, bound_id, params, expected):
        assert k.bound_value(bound_id, params).value == pytest.approx(expected, rel=1e-12)

    def test_registry_lock_covers_every_bound(self):
        assert {case[0] for case in REGISTRY_LOCK_CASES} == set(k.bound_ids())


def test_smoothed_probs_matches_estimate(rng):
    for text in ("mle", "laplace", "kt", "add:0.3", "conf:0.01", "adaptive", "adaptive-conf:0.05"):
        spec = EstimatorSpec.parse(text)
        counts = rng.multinomial(20, rng.dirichlet(np.ones(6)))
        got = smoothed_probs(spec, counts, 20, 6)
        want = k.estimate(spec, k.count_vector(counts)).probs
        np.testing.assert_allclose(got, want, rtol=1e-14)
