"""Post-processing of flow traces: decay slopes, series residuals, additivity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cumulant import CumulantTable, kl_series
from .trace import FlowTrace

__all__ = [
    "SlopeEstimate",
    "ResidualReport",
    "AdditivityReport",
    "slope",
    "theory_residual",
    "slope_additivity_report",
    "slopes_table_text",
    "slopes_to_csv",
    "residual_to_csv",
]


@dataclass(frozen=True)
class SlopeEstimate:
    """Two-point slope of log KL versus t, with the snapped row times used."""

    value: float
    t1: float
    t2: float
    kl1: float
    kl2: float

    def __float__(self) -> float:
        return self.value


def slope(trace: FlowTrace, t1: float, t2: float) -> SlopeEstimate:
    """Difference quotient (log KL(t2) - log KL(t1)) / (t2 - t1).

    The requested endpoints snap to the nearest recorded rows; the snapped
    times are reported and used in the quotient.  KL must be strictly
    positive at both rows (a non-positive value means the trace already sits
    on its numerical floor and the slope would be meaningless).
    """
    if not t1 < t2:
        raise ValueError(f"need t1 < t2, got {t1} and {t2}")
    t = trace.t
    slack = 0.5 * (t[-1] - t[0]) / max(t.size - 1, 1)
    if t1 < t[0] - slack or t2 > t[-1] + slack:
        raise ValueError(
            f"window [{t1}, {t2}] falls outside the recorded range [{t[0]:g}, {t[-1]:g}]"
        )
    i1 = int(np.argmin(np.abs(t - t1)))
    i2 = int(np.argmin(np.abs(t - t2)))
    if i1 == i2:
        raise ValueError(f"window [{t1}, {t2}] is narrower than the record cadence")
    kl1 = float(trace.kl[i1])
    kl2 = float(trace.kl[i2])
    for label, value in (("t1", kl1), ("t2", kl2)):
        if value <= 0.0:
            raise ValueError(
                f"KL at {label} is {value:g}; the trace has hit its numerical floor"
            )
    value = (math.log(kl2) - math.log(kl1)) / (float(t[i2]) - float(t[i1]))
    return SlopeEstimate(value=value, t1=float(t[i1]), t2=float(t[i2]), kl1=kl1, kl2=kl2)


@dataclass(frozen=True, eq=False)
class ResidualReport:
    """Rowwise KL_sim - series prediction, and the growth-capped summary.

    summary is the maximum of |residual| * e^{3t} over recorded t >= 3 (NaN
    when the trace ends earlier); bounded summaries are what the cubic-order
    remainder claim predicts for closed-form traces.
    """

    t: np.ndarray
    residual: np.ndarray
    order: int
    summary: float


def theory_residual(trace: FlowTrace, table: CumulantTable, order: int) -> ResidualReport:
    """Compare a birth-death trace against the truncated cumulant series."""
    kind = trace.meta.get("kind")
    if kind not in ("FR", "FR_exact"):
        raise ValueError(f"residuals are defined for FR/FR_exact traces, got kind {kind!r}")
    fp = trace.meta.get("fingerprint")
    if fp is None or fp != table.fingerprint:
        raise ValueError(
            "trace and cumulant table were built from different (init, target) pairs"
        )
    prediction = np.array([kl_series(table, float(tj), order) for tj in trace.t])
    residual = trace.kl - prediction
    mask = trace.t >= 3.0
    if np.any(mask):
        summary = float(np.max(np.abs(residual[mask]) * np.exp(3.0 * trace.t[mask])))
    else:
        summary = math.nan
    return ResidualReport(t=trace.t.copy(), residual=residual, order=order, summary=summary)


@dataclass(frozen=True)
class AdditivityReport:
    """How far the combined-flow slope sits from the sum of its parts."""

    fr: float
    w: float
    wfr: float
    discrepancy: float
    relative: float


def slope_additivity_report(fr, w, wfr) -> AdditivityReport:
    """Report wfr - (fr + w); an observation aid, not an asserted identity."""
    fr, w, wfr = float(fr), float(w), float(wfr)
    for name, value in (("fr", fr), ("w", w), ("wfr", wfr)):
        if not math.isfinite(value):
            raise ValueError(f"{name} slope must be finite, got {value}")
    discrepancy = wfr - (fr + w)
    if wfr != 0.0:
        relative = discrepancy / abs(wfr)
    else:
        relative = 0.0 if discrepancy == 0.0 else math.inf
    return AdditivityReport(fr=fr, w=w, wfr=wfr, discrepancy=discrepancy, relative=relative)


_FLOW_ORDER = ("FR", "WFR", "W", "FR_exact")


def _ordered_flows(slopes: dict[str, dict[str, object]]) -> list[str]:
    known = [f for f in _FLOW_ORDER if f in slopes]
    return known + [f for f in slopes if f not in _FLOW_ORDER]


def slopes_table_text(slopes: dict[str, dict[str, object]], title: str | None = None) -> str:
    """Render flows x initializations slope estimates as an aligned text table."""
    flows = _ordered_flows(slopes)
    inits: list[str] = []
    for flow in flows:
        for init in slopes[flow]:
            if init not in inits:
                inits.append(init)
    width = max([len(i) for i in inits] + [10])
    lines = []
    if title:
        lines.append(title)
    lines.append("  ".join(["flow".ljust(8)] + [i.rjust(width) for i in inits]))
    for flow in flows:
        cells = []
        for init in inits:
            est = slopes[flow].get(init)
            cells.append("-".rjust(width) if est is None else f"{float(est):.4f}".rjust(width))
        lines.append("  ".join([flow.ljust(8)] + cells))
    return "\n".join(lines) + "\n"


def slopes_to_csv(slopes: dict[str, dict[str, object]], path) -> None:
    """Write rows flow,init,slope,t1,t2,kl_t1,kl_t2 (snapped values where known)."""
    with open(path, "w") as fh:
        fh.write("flow,init,slope,t1,t2,kl_t1,kl_t2\n")
        for flow in _ordered_flows(slopes):
            for init, est in slopes[flow].items():
                if isinstance(est, SlopeEstimate):
                    fh.write(
                        f"{flow},{init},{est.value:.17g},{est.t1:.17g},{est.t2:.17g},"
                        f"{est.kl1:.17g},{est.kl2:.17g}\n"
                    )
                else:
                    fh.write(f"{flow},{init},{float(est):.17g},,,,\n")


def residual_to_csv(report: ResidualReport, path) -> None:
    """Write rows t,residual plus the summary as a trailing comment."""
    with open(path, "w") as fh:
        fh.write("t,residual\n")
        for tj, rj in zip(report.t, report.residual):
            fh.write(f"{tj:.17g},{rj:.17g}\n")
        fh.write(f"# order={report.order} summary_max_residual_e3t={report.summary:.17g}\n")
