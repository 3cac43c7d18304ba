import json
import math

import numpy as np
import pytest

import klsmooth as k
from klsmooth import EstimatorSpec, ExperimentConfig, RngSeed, ValidationError
from klsmooth.experiments import (
    TAIL_CSV_HEADER,
    _tail_verdict,
    clopper_pearson,
    empirical_quantile,
    exceedance,
    format_number,
    mc_statistics,
    quantile_band,
    write_json_report,
    write_report_csv,
)
from klsmooth.sampling import AliasSampler


def uniform(d):
    return k.resolve_distribution({"kind": "uniform", "d": d})


class TestExperimentConfig:
    def test_validation(self):
        pv = uniform(3)
        with pytest.raises(ValidationError):
            ExperimentConfig(pv, 0, EstimatorSpec.laplace(), 0.1, 10, 0)
        with pytest.raises(ValidationError):
            ExperimentConfig(pv, 5, EstimatorSpec.laplace(), 0.1, 0, 0)
        with pytest.raises(ValidationError):
            ExperimentConfig(pv, 5, EstimatorSpec.laplace(), 1.5, 10, 0)

    def test_json_echo(self):
        cfg = ExperimentConfig(uniform(2), 5, EstimatorSpec.laplace(), 0.1, 10, 7, ("laplace_whp",))
        obj = cfg.to_json_obj()
        assert obj["spec"] == "laplace" and obj["master_seed"] == 7


class TestMcStatistics:
    def test_worker_count_does_not_change_results(self):
        cfg = ExperimentConfig(uniform(4), 30, EstimatorSpec.laplace(), 0.05, 1500, 5)
        one = mc_statistics(cfg, ["kl", "missing_mass"], workers=1)
        two = mc_statistics(cfg, ["kl", "missing_mass"], workers=4)
        for name in one:
            assert one[name].tobytes() == two[name].tobytes()

    def test_trials_match_per_trial_recomputation(self):
        pv = k.make_prob_vector([0.5, 0.3, 0.2])
        cfg = ExperimentConfig(pv, 12, EstimatorSpec.laplace(), 0.05, 20, 99)
        stats = mc_statistics(cfg, ["kl", "reverse_kl", "missing_mass",
                                    "underestimated_mass", "hellinger_sq"])
        sampler = AliasSampler(pv)
        for t in range(20):
            counts = sampler.draw(12, RngSeed(99, t).generator())
            est = k.estimate(EstimatorSpec.laplace(), k.count_vector(counts))
            assert stats["kl"][t] == pytest.approx(k.kl_divergence(pv, est), rel=1e-12)
            assert stats["reverse_kl"][t] == pytest.approx(
                k.kl_divergence(counts / 12, pv), rel=1e-12, abs=1e-15)
            summary = k.summarize(pv, counts)
            assert stats["missing_mass"][t] == pytest.approx(summary.missing_mass, abs=1e-15)
            assert stats["underestimated_mass"][t] == pytest.approx(
                summary.underestimated_mass, abs=1e-15)
            assert stats["hellinger_sq"][t] == pytest.approx(
                k.hellinger_sq(counts / 12, pv), rel=1e-12, abs=1e-15)

    def test_unknown_statistic_rejected(self):
        cfg = ExperimentConfig(uniform(2), 5, EstimatorSpec.laplace(), 0.1, 5, 0)
        with pytest.raises(ValidationError):
            mc_statistics(cfg, ["tv_distance"])

    def test_mle_can_be_infinite(self):
        pv = k.make_prob_vector([0.9, 0.1])
        cfg = ExperimentConfig(pv, 2, EstimatorSpec.mle(), 0.1, 400, 3)
        vals = mc_statistics(cfg, ["kl"])["kl"]
        assert np.any(np.isinf(vals)) and np.any(np.isfinite(vals))


class TestQuantileMachinery:
    def test_empirical_quantile_convention(self):
        vals = np.array([0.0, 0.0, 1.0, 2.0])
        assert empirical_quantile(vals, 0.5) == 0.0
        assert empirical_quantile(vals, 0.51) == 1.0
        assert empirical_quantile(vals, 1.0) == 2.0
        assert empirical_quantile(vals, 0.0) == 0.0

    def test_band_brackets_point(self, rng):
        vals = np.sort(rng.standard_normal(5000))
        for q in (0.01, 0.5, 0.9, 0.999):
            lo, pt, hi = quantile_band(vals, q)
            assert lo <= pt <= hi

    def test_band_covers_true_quantile_usually(self):
        # coverage of the order-statistic band for a known continuous law
        hits = 0
        for seed in range(200):
            g = np.random.default_rng(seed)
            vals = np.sort(g.standard_normal(2000))
            lo, _, hi = quantile_band(vals, 0.9, conf=0.99)
            true_q = 1.2815515655446004
            hits += lo <= true_q <= hi
        assert hits >= 190

    def test_clopper_pearson_edges(self):
        lo, hi = clopper_pearson(0, 100)
        assert lo == 0.0 and 0 < hi < 0.06
        lo, hi = clopper_pearson(100, 100)
        assert hi == 1.0 and lo > 0.94
        with pytest.raises(ValidationError):
            clopper_pearson(5, 4)

    def test_exceedance(self):
        vals = np.array([0.1, 0.5, 0.9, math.inf])
        count, frac, lo, hi = exceedance(vals, 0.5)
        assert count == 3 and frac == 0.75
        assert lo < 0.75 < hi

    def test_verdict_logic(self):
        assert _tail_verdict(1.0, 2.0, 0.5, None) == "violated"
        assert _tail_verdict(1.0, 2.0, 3.0, None) == "holds"
        assert _tail_verdict(1.0, 2.0, 1.5, None) == "inconclusive"
        assert _tail_verdict(1.0, 2.0, 5.0, vacuous_envelope=4.0) == "holds (vacuous)"
        assert _tail_verdict(1.0, 2.0, 3.0, vacuous_envelope=4.0) == "holds"


class TestMcRiskTail:
    def test_holds_on_generous_bound(self):
        cfg = ExperimentConfig(uniform(5), 100, EstimatorSpec.laplace(), 0.01, 800, 17,
                               ("laplace_whp",))
        report = k.mc_risk_tail(cfg)
        (r,) = report.reports
        assert r.verdict.startswith("holds")
        assert r.ci_low <= r.empirical_quantile <= r.ci_high
        assert r.level == pytest.approx(1 - 4 * 0.01)

    def test_rejects_lower_bound_ids(self):
        cfg = ExperimentConfig(uniform(5), 20, EstimatorSpec.laplace(), 0.01, 10, 0,
                               ("lower_minimax",))
        with pytest.raises(ValidationError, match="lower bounds"):
            k.mc_risk_tail(cfg)

    def test_spec_mismatch_warns(self):
        cfg = ExperimentConfig(uniform(3), 50, EstimatorSpec.krichevsky_trofimov(), 0.01,
                               200, 0, ("conf_whp",))
        (r,) = k.mc_risk_tail(cfg).reports
        assert any("stated for" in w for w in r.validity_warnings)

    def test_quantile_matches_oracle_within_band(self):
        pv = k.make_prob_vector([0.5, 0.3, 0.2])
        n, trials = 8, 60_000
        cfg = ExperimentConfig(pv, n, EstimatorSpec.laplace(), 0.05, trials, 23,
                               ("laplace_whp",))
        f = k.exact_functionals(pv, n, EstimatorSpec.laplace())
        vals = np.sort(mc_statistics(cfg, ["kl"])["kl"])
        g = np.random.default_rng(1)
        for t in g.uniform(0, float(vals[-1]), 10):
            exact_tail = f.tail(t)
            mc_tail = float((vals >= t).mean())
            se = math.sqrt(max(exact_tail * (1 - exact_tail), 1e-12) / trials)
            assert abs(mc_tail - exact_tail) <= 5 * se + 1e-9

    def test_missing_mass_tail_matches_enumeration(self):
        # P(M_2 >= 1/2) = 1/2 for a fair coin
        pv = k.make_prob_vector([0.5, 0.5])
        cfg = ExperimentConfig(pv, 2, EstimatorSpec.laplace(), 0.3, 40_000, 8,
                               ("missing_mass_whp",))
        vals = mc_statistics(cfg, ["missing_mass"])["missing_mass"]
        assert float((vals >= 0.5).mean()) == pytest.approx(0.5, abs=0.02)

    def test_point_mass_risk_is_constant(self):
        # only one possible sample, so every quantile equals the one atom
        pv = k.make_prob_vector([1.0, 0.0])
        n, d = 100, 2
        cfg = ExperimentConfig(pv, n, EstimatorSpec.laplace(), 0.01, 500, 4,
                               ("laplace_whp",))
        (r,) = k.mc_risk_tail(cfg).reports
        constant = math.log((n + d) / (n + 1))
        assert r.empirical_quantile == pytest.approx(constant, rel=1e-12)
        assert r.ci_low == pytest.approx(constant, rel=1e-12)
        assert r.ci_high == pytest.approx(constant, rel=1e-12)
        assert r.verdict.startswith("holds")


class TestMcExpectation:
    def test_add_one_expectation_holds(self):
        cfg = ExperimentConfig(uniform(4), 20, EstimatorSpec.laplace(), 0.01, 30_000, 19,
                               ("expectation_laplace",))
        (r,) = k.mc_expectation(cfg).reports
        assert r.verdict == "holds"
        assert r.mean <= r.bound_rhs + 4 * r.std_error

    def test_infinite_divergence_flagged(self):
        pv = k.make_prob_vector([0.9, 0.1])
        cfg = ExperimentConfig(pv, 3, EstimatorSpec.mle(), 0.01, 500, 2,
                               ("expectation_laplace",))
        (r,) = k.mc_expectation(cfg).reports
        assert r.verdict == "violated-by-infinity"
        assert r.infinite_trials > 0
        assert r.mean == math.inf

    def test_rejects_tail_bounds(self):
        cfg = ExperimentConfig(uniform(3), 5, EstimatorSpec.laplace(), 0.1, 5, 0,
                               ("missing_mass_whp",))
        with pytest.raises(ValidationError):
            k.mc_expectation(cfg)


class TestLowerBoundChecker:
    def test_add_one_satisfies_threshold(self):
        chk = k.check_lower_bound_construction(
            EstimatorSpec.laplace(), 4000, 4000, math.exp(-17), kappa=1.0)
        assert chk.branch == "constructed"
        assert chk.satisfied
        assert chk.event_probability == pytest.approx(math.exp(-17), rel=1e-12)
        assert chk.kl_on_event >= chk.threshold
        assert chk.threshold == pytest.approx(17 * math.log(17) / 40_000, rel=1e-12)
        assert chk.adversary_class == 2  # add-one treats all unseen classes equally

    def test_uniform_dummy_violates_hypothesis(self):
        dummy = lambda cv: k.make_prob_vector(np.ones(cv.d))  # noqa: E731
        chk = k.check_lower_bound_construction(dummy, 4000, 4000, math.exp(-17))
        assert chk.branch == "hypothesis-violated"

    def test_boundary_delta_warns_but_computes(self):
        chk = k.check_lower_bound_construction(
            EstimatorSpec.laplace(), 4000, 4000, math.exp(-16.0), kappa=1.0)
        assert any("delta" in w for w in chk.warnings)
        assert math.isfinite(chk.kl_on_event)

    def test_picks_smallest_unseen_mass(self):
        def skewed(cv):
            w = np.full(cv.d, 2.0)
            w[0] = float(cv.n)
            w[3] = 1e-4
            return k.make_prob_vector(w)

        chk = k.check_lower_bound_construction(skewed, 500, 6, math.exp(-17))
        assert chk.adversary_class == 4

    def test_validation(self):
        with pytest.raises(ValidationError):
            k.check_lower_bound_construction(EstimatorSpec.laplace(), 10, 3, 0.5, kappa=0.5)


class TestRegimeMap:
    def test_single_cell_reduces_to_tail_run(self):
        pv = uniform(4)
        spec = EstimatorSpec.laplace()
        cells = k.regime_map(pv, spec, [50], [0.01], trials=400, master_seed=3,
                             bound_ids=("laplace_whp",))
        assert len(cells) == 1
        cfg = ExperimentConfig(pv, 50, spec, 0.01, 400, 3, ("laplace_whp",))
        direct = k.mc_risk_tail(cfg).reports[0]
        assert cells[0].report == direct

    def test_full_grid_has_no_empty_cells(self):
        cells = k.regime_map(uniform(3), EstimatorSpec.laplace(), [20, 40], [0.05, 0.01, 0.002],
                             trials=200, master_seed=1, bound_ids=("laplace_whp",))
        assert len(cells) == 6
        assert {(c.n, c.delta) for c in cells} == {(n, dl) for n in (20, 40)
                                                   for dl in (0.05, 0.01, 0.002)}

    def test_empty_grid_rejected(self):
        with pytest.raises(ValidationError):
            k.regime_map(uniform(3), EstimatorSpec.laplace(), [], [0.1], 10, 0, ("laplace_whp",))

    def test_conf_bound_below_add_one_bound_in_high_confidence_regime(self):
        # the confidence-dependent rate improves on the confidence-independent
        # one (constant 1) once log(1/delta) >= d, where log d <= loglog(1/delta)
        for d in (3, 10, 40):
            for log1d in (d, 2 * d, 10 * d):
                if log1d <= 2:
                    continue
                delta = math.exp(-log1d)
                conf = k.bound_value("conf_whp", {"n": 1000, "d": d, "delta": delta}).value
                lap = k.bound_value("laplace_whp", {"n": 1000, "d": d, "delta": delta}).value
                assert conf <= lap + 1e-9


class TestSerialization:
    def test_csv_stable_header_and_inf_literal(self, tmp_path):
        pv = k.make_prob_vector([0.9, 0.1])
        cfg = ExperimentConfig(pv, 2, EstimatorSpec.mle(), 0.2, 50, 5, ("reverse_kl_linear",))
        report = k.mc_risk_tail(cfg)
        path = tmp_path / "rows.csv"
        write_report_csv(path, list(report.reports))
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(TAIL_CSV_HEADER)
        assert len(lines) == 2

    def test_format_number(self):
        assert format_number(math.inf) == "inf"
        assert format_number(-math.inf) == "-inf"
        assert format_number(1 / 3) == "0.333333333333"
        assert format_number(3) == "3"

    def test_json_mirror_reproducible(self, tmp_path):
        cfg = ExperimentConfig(uniform(3), 20, EstimatorSpec.laplace(), 0.05, 300, 11,
                               ("laplace_whp",))
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        write_json_report(a, cfg, list(k.mc_risk_tail(cfg, workers=1).reports))
        write_json_report(b, cfg, list(k.mc_risk_tail(cfg, workers=3).reports))
        assert a.read_bytes() == b.read_bytes()
        payload = json.loads(a.read_text())
        assert payload["config"]["n"] == 20
        assert payload["rows"][0]["bound_id"] == "laplace_whp"
