"""Time series of divergences recorded along a flow, with CSV round-trip.

The CSV layout is: comment lines holding a JSON metadata snapshot, a header
``t,kl,renyi_q<q>...,chi2,mass_drift``, then one row per record time with 17
significant digits so values round-trip bit-identically.  A run that diverged
keeps its partial rows and appends a ``# FAILED`` marker line.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["FlowTrace", "trace_to_csv", "trace_from_csv"]

#: Divergence columns this far below zero are round-off; anything worse is invalid.
NEGATIVE_TOL = 1e-12


def _format_q(q: float) -> str:
    return f"{q:g}"


@dataclass(eq=False)
class FlowTrace:
    """Recorded (t, KL, Renyi, chi-squared, mass drift) rows plus a config snapshot.

    renyi maps each requested order q to its column.  meta records the run
    configuration (kind, target, init, eps, n, ...) and, for failed runs, the
    failure time and reason under ``failed_t`` / ``failed_reason``.
    """

    t: np.ndarray
    kl: np.ndarray
    renyi: dict[float, np.ndarray]
    chi2: np.ndarray
    mass_drift: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=float)
        self.kl = np.asarray(self.kl, dtype=float)
        self.chi2 = np.asarray(self.chi2, dtype=float)
        self.mass_drift = np.asarray(self.mass_drift, dtype=float)
        self.renyi = {float(q): np.asarray(col, dtype=float) for q, col in self.renyi.items()}
        m = self.t.size
        for name, col in self.columns().items():
            if col.shape != (m,):
                raise ValueError(f"column {name} has {col.size} rows, expected {m}")
        if m == 0:
            raise ValueError("trace has no rows")
        if m > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("record times must be strictly increasing")
        for name in ("kl", "chi2"):
            col = getattr(self, name)
            if not np.all(np.isfinite(col)):
                raise ValueError(f"column {name} contains non-finite entries")
            if np.min(col) < -NEGATIVE_TOL:
                raise ValueError(f"column {name} is negative beyond round-off")
        for q, col in self.renyi.items():
            if not np.all(np.isfinite(col)):
                raise ValueError(f"column renyi_q{_format_q(q)} contains non-finite entries")
            if np.min(col) < -NEGATIVE_TOL:
                raise ValueError(f"column renyi_q{_format_q(q)} is negative beyond round-off")

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"t": self.t, "kl": self.kl}
        for q in self.renyi:
            cols[f"renyi_q{_format_q(q)}"] = self.renyi[q]
        cols["chi2"] = self.chi2
        cols["mass_drift"] = self.mass_drift
        return cols

    @property
    def failed(self) -> bool:
        return "failed_t" in self.meta


def trace_to_csv(trace: FlowTrace, path) -> None:
    """Write the trace with its metadata comment and 17-digit rows."""
    cols = trace.columns()
    meta = {k: v for k, v in trace.meta.items() if k not in ("failed_t", "failed_reason")}
    lines = [f"# meta={json.dumps(meta)}"]
    lines.append(",".join(cols))
    data = np.column_stack(list(cols.values()))
    buf = io.StringIO()
    np.savetxt(buf, data, fmt="%.17g", delimiter=",")
    lines.append(buf.getvalue().rstrip("\n"))
    if trace.failed:
        t_fail = trace.meta["failed_t"]
        reason = trace.meta.get("failed_reason", "divergence")
        lines.append(f"# FAILED t={t_fail:.17g} reason={reason}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def trace_from_csv(path) -> FlowTrace:
    """Parse a trace CSV back into a FlowTrace, including failure markers."""
    meta: dict = {}
    header: list[str] | None = None
    rows: list[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.startswith("meta="):
                    meta.update(json.loads(body[len("meta="):]))
                elif body.startswith("FAILED"):
                    parts = dict(
                        item.split("=", 1) for item in body.split()[1:] if "=" in item
                    )
                    meta["failed_t"] = float(parts.get("t", "nan"))
                    meta["failed_reason"] = parts.get("reason", "divergence")
                continue
            if header is None:
                header = line.split(",")
            else:
                rows.append(line)
    if header is None or not rows:
        raise ValueError(f"{path}: no data rows found")
    expected_fixed = {"t", "kl", "chi2", "mass_drift"}
    missing = expected_fixed - set(header)
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    data = np.loadtxt(io.StringIO("\n".join(rows)), delimiter=",", ndmin=2)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: rows have {data.shape[1]} fields, header has {len(header)}")
    by_name = {name: data[:, i] for i, name in enumerate(header)}
    renyi = {}
    for name in header:
        if name.startswith("renyi_q"):
            q = float(name[len("renyi_q"):])
            if not math.isfinite(q) or q <= 1.0:
                raise ValueError(f"{path}: bad Renyi column {name}")
            renyi[q] = by_name[name]
    return FlowTrace(
        t=by_name["t"],
        kl=by_name["kl"],
        renyi=renyi,
        chi2=by_name["chi2"],
        mass_drift=by_name["mass_drift"],
        meta=meta,
    )
