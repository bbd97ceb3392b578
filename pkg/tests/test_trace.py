"""FlowTrace validation and the 17-digit CSV round trip."""

import numpy as np
import pytest

from gradflow import FlowTrace, RunSpec, builtin, run, trace_from_csv, trace_to_csv


def small_trace(q_list=(2.0,)):
    return run(
        RunSpec(
            kind="FR",
            target=builtin("V2"),
            init=builtin("Vd"),
            n=64,
            eps=1e-3,
            T=0.05,
            record_dt=0.01,
            q_list=q_list,
        )
    )


def synth(t, kl, meta=None):
    t = np.asarray(t, dtype=float)
    kl = np.asarray(kl, dtype=float)
    return FlowTrace(
        t=t, kl=kl, renyi={}, chi2=kl.copy(), mass_drift=np.zeros_like(kl), meta=meta or {}
    )


class TestValidation:
    def test_no_rows_rejected(self):
        with pytest.raises(ValueError, match="no rows"):
            synth([], [])

    def test_non_increasing_times_rejected(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            synth([0.0, 0.1, 0.1], [1.0, 1.0, 1.0])

    def test_non_finite_divergence_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            synth([0.0, 0.1], [1.0, np.nan])

    def test_negative_beyond_roundoff_rejected(self):
        with pytest.raises(ValueError, match="negative beyond round-off"):
            synth([0.0, 0.1], [1.0, -1e-9])

    def test_roundoff_negatives_tolerated(self):
        tr = synth([0.0, 0.1], [1.0, -5e-13])
        assert tr.kl[1] == -5e-13

    def test_mismatched_column_length_rejected(self):
        with pytest.raises(ValueError, match="rows"):
            FlowTrace(
                t=np.array([0.0, 0.1]),
                kl=np.array([1.0]),
                renyi={},
                chi2=np.array([1.0, 1.0]),
                mass_drift=np.zeros(2),
            )

    def test_negative_renyi_column_rejected(self):
        with pytest.raises(ValueError, match="renyi_q2"):
            FlowTrace(
                t=np.array([0.0, 0.1]),
                kl=np.array([1.0, 1.0]),
                renyi={2.0: np.array([1.0, -1e-9])},
                chi2=np.array([1.0, 1.0]),
                mass_drift=np.zeros(2),
            )

    def test_failed_flag(self):
        assert not small_trace().failed
        assert synth([0.0], [1.0], meta={"failed_t": 0.5}).failed

    def test_column_order(self):
        tr = small_trace(q_list=(1.5, 2.0, 4.0))
        assert list(tr.columns()) == ["t", "kl", "renyi_q1.5", "renyi_q2", "renyi_q4", "chi2", "mass_drift"]


class TestCsvRoundTrip:
    def test_bit_identical_columns(self, tmp_path):
        tr = small_trace(q_list=(1.5, 2.0, 4.0))
        path = tmp_path / "trace.csv"
        trace_to_csv(tr, path)
        back = trace_from_csv(path)
        for name, col in tr.columns().items():
            np.testing.assert_array_equal(back.columns()[name], col, err_msg=name)
        assert set(back.renyi) == {1.5, 2.0, 4.0}

    def test_meta_round_trip(self, tmp_path):
        tr = small_trace()
        path = tmp_path / "trace.csv"
        trace_to_csv(tr, path)
        back = trace_from_csv(path)
        assert back.meta["kind"] == "FR"
        assert back.meta["eps"] == tr.meta["eps"]
        assert back.meta["n"] == 64
        assert back.meta["fingerprint"] == tr.meta["fingerprint"]
        assert back.meta["target"] == {"builtin": "V2"}

    def test_layout(self, tmp_path):
        tr = small_trace()
        path = tmp_path / "trace.csv"
        trace_to_csv(tr, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# meta={")
        assert lines[1] == "t,kl,renyi_q2,chi2,mass_drift"
        assert len(lines) == 2 + tr.t.size

    def test_failed_marker(self, tmp_path):
        tr = small_trace()
        tr.meta["failed_t"] = 0.05
        tr.meta["failed_reason"] = "non-finite iterate (stepsize too large?)"
        path = tmp_path / "trace.csv"
        trace_to_csv(tr, path)
        text = path.read_text()
        assert text.rstrip().splitlines()[-1].startswith("# FAILED t=")
        assert "failed_t" not in text.splitlines()[0]
        back = trace_from_csv(path)
        assert back.failed
        assert back.meta["failed_t"] == 0.05
        # the reason survives only up to its first space
        assert back.meta["failed_reason"] == "non-finite"

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="no data rows"):
            trace_from_csv(path)

    def test_header_only_rejected(self, tmp_path):
        path = tmp_path / "head.csv"
        path.write_text("t,kl,chi2,mass_drift\n")
        with pytest.raises(ValueError, match="no data rows"):
            trace_from_csv(path)

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text("t,kl,chi2\n0,1,1\n")
        with pytest.raises(ValueError, match="mass_drift"):
            trace_from_csv(path)

    def test_bad_renyi_order_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,kl,renyi_q0.5,chi2,mass_drift\n0,1,1,1,0\n")
        with pytest.raises(ValueError, match="renyi_q0.5"):
            trace_from_csv(path)

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("t,kl,chi2,mass_drift\n0,1,1\n")
        with pytest.raises(ValueError):
            trace_from_csv(path)
