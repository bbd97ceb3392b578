"""Slope extraction, series residuals, and the additivity report."""

import csv
import math

import numpy as np
import pytest

from gradflow import (
    FlowTrace,
    RunSpec,
    blend,
    build_table,
    builtin,
    from_potential,
    kl_series_error,
    make_grid,
    residual_to_csv,
    run,
    slope,
    slope_additivity_report,
    slopes_table_text,
    slopes_to_csv,
    theory_residual,
)
from helpers import potential_of, random_terms

G = make_grid(2000)


def synth(t, kl, meta=None):
    t = np.asarray(t, dtype=float)
    kl = np.asarray(kl, dtype=float)
    return FlowTrace(
        t=t, kl=kl, renyi={}, chi2=kl.copy(), mass_drift=np.zeros_like(kl), meta=meta or {}
    )


def exact_trace(target, init, T, dt=0.01):
    return run(RunSpec(kind="FR_exact", target=target, init=init, n=2000, T=T, record_dt=dt))


class TestSlope:
    def test_pure_exponential_gives_exact_rate(self):
        t = np.linspace(0.0, 2.0, 21)
        tr = synth(t, 3.0 * np.exp(-2.0 * t))
        est = slope(tr, 0.5, 1.5)
        assert est.value == pytest.approx(-2.0, abs=1e-10)

    def test_invariant_under_positive_rescaling(self):
        t = np.linspace(0.0, 2.0, 21)
        kl = np.exp(-1.3 * t) + 0.2 * np.exp(-3.0 * t)
        a = slope(synth(t, kl), 0.3, 1.7).value
        b = slope(synth(t, 7.0 * kl), 0.3, 1.7).value
        assert abs(a - b) <= 1e-12

    def test_near_target_start_decays_at_rate_two(self):
        # starting 99% of the way along the interpolation path leaves only
        # the leading quadratic term, so the late-time slope is -2
        tr = exact_trace(builtin("V1"), blend(builtin("Va"), builtin("V1"), 0.99), T=6.5)
        est = slope(tr, 5.0, 6.0)
        assert est.value == pytest.approx(-2.0, abs=1e-3)

    def test_late_window_rate_for_builtin_pairs(self):
        for target, init in (("V1", "Va"), ("V1", "Vb"), ("V2", "Vc"), ("V2", "Vd")):
            tr = exact_trace(builtin(target), builtin(init), T=8.5)
            est = slope(tr, 8.0, 8.5)
            assert abs(est.value + 2.0) <= 0.01, (target, init, est.value)

    def test_late_window_rate_for_random_pairs(self):
        rng = np.random.default_rng(2024)
        for _ in range(3):
            target = potential_of(random_terms(rng))
            init = potential_of(random_terms(rng))
            tr = exact_trace(target, init, T=8.5, dt=0.05)
            est = slope(tr, 8.0, 8.5)
            assert abs(est.value + 2.0) <= 0.01

    def test_endpoints_snap_to_recorded_rows(self):
        t = np.linspace(0.0, 1.0, 11)
        tr = synth(t, np.exp(-t))
        est = slope(tr, 0.43, 0.82)
        assert est.t1 == tr.t[4]
        assert est.t2 == tr.t[8]
        assert est.kl1 == tr.kl[4]
        assert est.kl2 == tr.kl[8]
        assert est.value == (math.log(est.kl2) - math.log(est.kl1)) / (est.t2 - est.t1)

    def test_float_conversion(self):
        tr = synth(np.linspace(0, 1, 11), np.exp(-np.linspace(0, 1, 11)))
        assert float(slope(tr, 0.0, 1.0)) == slope(tr, 0.0, 1.0).value

    def test_cadence_does_not_move_the_estimate(self):
        a = exact_trace(builtin("V2"), builtin("Vc"), T=6.5, dt=0.01)
        b = exact_trace(builtin("V2"), builtin("Vc"), T=6.5, dt=0.005)
        assert abs(slope(a, 5.0, 6.0).value - slope(b, 5.0, 6.0).value) < 1e-3

    def test_reversed_window_rejected(self):
        tr = synth([0.0, 0.5, 1.0], [1.0, 0.5, 0.2])
        with pytest.raises(ValueError, match="t1 < t2"):
            slope(tr, 0.8, 0.2)

    def test_window_outside_range_rejected(self):
        tr = synth([0.0, 0.5, 1.0], [1.0, 0.5, 0.2])
        with pytest.raises(ValueError, match="outside the recorded range"):
            slope(tr, 0.5, 4.0)

    def test_window_narrower_than_cadence_rejected(self):
        tr = synth([0.0, 0.5, 1.0], [1.0, 0.5, 0.2])
        with pytest.raises(ValueError, match="narrower than the record cadence"):
            slope(tr, 0.48, 0.52)

    def test_kl_floor_rejected(self):
        tr = synth([0.0, 0.5, 1.0], [1.0, 0.5, 0.0])
        with pytest.raises(ValueError, match="numerical floor"):
            slope(tr, 0.0, 1.0)


class TestTheoryResidual:
    def table(self, target, init, order=8):
        return build_table(from_potential(builtin(init), G), from_potential(builtin(target), G), max_order=order)

    def test_full_order_residual_is_first_omitted_term(self):
        tbl = self.table("V1", "Va")
        tr = exact_trace(builtin("V1"), builtin("Va"), T=8.0)
        rep = theory_residual(tr, tbl, 7)
        bound = kl_series_error(tbl, 3.0, 7) * math.exp(9.0)
        assert 0.0 < rep.summary <= 2.0 * bound

    def test_low_order_residual_reaches_cubic_asymptote(self):
        tbl = self.table("V1", "Va")
        tr = exact_trace(builtin("V1"), builtin("Va"), T=8.0)
        rep = theory_residual(tr, tbl, 2)
        j = int(np.argmin(np.abs(tr.t - 6.0)))
        scaled = abs(rep.residual[j]) * math.exp(3.0 * float(tr.t[j]))
        k3 = tbl.kappas[2]
        assert scaled == pytest.approx(abs(k3) / 3.0, rel=0.02)

    def test_identical_pair_residual_vanishes(self):
        tbl = self.table("V1", "V1")
        tr = exact_trace(builtin("V1"), builtin("V1"), T=4.0)
        rep = theory_residual(tr, tbl, 8)
        assert np.abs(rep.residual).max() <= 1e-12

    def test_numeric_trace_summary_finite(self):
        tbl = self.table("V2", "Vd")
        tr = run(
            RunSpec(kind="FR", target=builtin("V2"), init=builtin("Vd"), n=2000, eps=1e-5, T=3.5, record_dt=0.05)
        )
        rep = theory_residual(tr, tbl, 8)
        assert math.isfinite(rep.summary)

    def test_short_trace_summary_is_nan(self):
        tbl = self.table("V2", "Vd")
        tr = exact_trace(builtin("V2"), builtin("Vd"), T=2.0)
        assert math.isnan(theory_residual(tr, tbl, 8).summary)

    def test_wrong_kind_rejected(self):
        tbl = self.table("V2", "Vd")
        tr = run(
            RunSpec(kind="W", target=builtin("V2"), init=builtin("Vd"), n=2000, eps=1e-6, T=0.01, record_dt=0.01)
        )
        with pytest.raises(ValueError, match="FR/FR_exact"):
            theory_residual(tr, tbl, 8)

    def test_fingerprint_mismatch_rejected(self):
        tbl = self.table("V1", "Vb")
        tr = exact_trace(builtin("V1"), builtin("Va"), T=4.0)
        with pytest.raises(ValueError, match="different \\(init, target\\) pairs"):
            theory_residual(tr, tbl, 8)


class TestAdditivity:
    def test_reported_values_for_narrow_target(self):
        rep = slope_additivity_report(-2.0028, -10.7784, -12.8190)
        assert rep.discrepancy == pytest.approx(-0.0378, abs=1e-12)
        assert abs(rep.discrepancy) <= 0.15
        assert rep.relative == rep.discrepancy / 12.8190

    def test_reported_values_for_bimodal_target(self):
        rep = slope_additivity_report(-2.0016, -0.0811, -2.0771)
        assert rep.discrepancy == pytest.approx(0.0056, abs=1e-12)
        assert abs(rep.discrepancy) <= 0.15

    def test_zero_slopes(self):
        rep = slope_additivity_report(0.0, 0.0, 0.0)
        assert rep.discrepancy == 0.0
        assert rep.relative == 0.0

    def test_accepts_slope_estimates(self):
        t = np.linspace(0.0, 1.0, 11)
        est = slope(synth(t, np.exp(-2.0 * t)), 0.0, 1.0)
        rep = slope_additivity_report(est, 0.0, est)
        assert rep.discrepancy == 0.0

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            slope_additivity_report(float("nan"), -1.0, -3.0)
        with pytest.raises(ValueError, match="finite"):
            slope_additivity_report(-1.0, -1.0, float("inf"))


class TestRendering:
    def sample_slopes(self):
        t = np.linspace(0.0, 1.0, 11)
        est = slope(synth(t, np.exp(-2.0 * t)), 0.0, 1.0)
        return {"W": {"pi_a": -0.0811}, "FR": {"pi_a": est, "pi_b": -2.0002}}

    def test_table_text_layout(self):
        text = slopes_table_text(self.sample_slopes(), title="slopes")
        lines = text.splitlines()
        assert lines[0] == "slopes"
        assert lines[1].split() == ["flow", "pi_a", "pi_b"]
        # the combined ordering puts FR before W regardless of dict order
        assert lines[2].startswith("FR")
        assert lines[3].startswith("W")
        assert "-0.0811" in lines[3]
        assert lines[3].split()[-1] == "-"

    def test_slopes_csv(self, tmp_path):
        path = tmp_path / "slopes.csv"
        slopes_to_csv(self.sample_slopes(), path)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert [r["flow"] for r in rows] == ["FR", "FR", "W"]
        by_key = {(r["flow"], r["init"]): r for r in rows}
        est = self.sample_slopes()["FR"]["pi_a"]
        assert float(by_key[("FR", "pi_a")]["slope"]) == est.value
        assert float(by_key[("FR", "pi_a")]["t1"]) == est.t1
        assert by_key[("W", "pi_a")]["t1"] == ""

    def test_residual_csv(self, tmp_path):
        tbl = build_table(from_potential(builtin("Va"), G), from_potential(builtin("V1"), G), max_order=8)
        tr = exact_trace(builtin("V1"), builtin("Va"), T=4.0)
        rep = theory_residual(tr, tbl, 7)
        path = tmp_path / "residual.csv"
        residual_to_csv(rep, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,residual"
        assert len(lines) == 1 + rep.t.size + 1
        assert lines[-1].startswith("# order=7 summary_max_residual_e3t=")
        parsed = np.loadtxt(path, delimiter=",", skiprows=1, comments="#", ndmin=2)
        np.testing.assert_array_equal(parsed[:, 1], rep.residual)
