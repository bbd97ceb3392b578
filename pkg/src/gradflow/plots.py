"""Static SVG figures: semi-log divergence decay and potential energy curves."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .cumulant import build_table
from .grid import Grid, make_grid
from .measure import from_potential
from .potential import Potential, TabulatedPotential, potential_from_config
from .trace import FlowTrace

__all__ = ["plot_divergences", "plot_energies"]

_LINESTYLES = {"FR": "-", "WFR": "-.", "W": "--", "FR_exact": (0, (1, 1))}


def _init_colors(traces: list[FlowTrace]) -> dict[str, str]:
    cycle = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    colors: dict[str, str] = {}
    for trace in traces:
        label = str(trace.meta.get("init_label", "init"))
        if label not in colors:
            colors[label] = cycle[len(colors) % len(cycle)]
    return colors


def _leading_coefficient(trace: FlowTrace) -> float | None:
    """kappa_2 / 2 recomputed from the metadata config, if reconstructable."""
    target_cfg = trace.meta.get("target")
    init_cfg = trace.meta.get("init")
    n = trace.meta.get("n")
    if not isinstance(n, int):
        return None
    for cfg in (target_cfg, init_cfg):
        if not isinstance(cfg, dict) or not ({"builtin", "terms"} & cfg.keys()):
            return None
    grid = make_grid(n)
    pi = from_potential(potential_from_config(target_cfg), grid)
    rho0 = from_potential(potential_from_config(init_cfg), grid)
    table = build_table(rho0, pi, max_order=2)
    return 0.5 * float(table.kappas[1])


def plot_divergences(
    traces: list[FlowTrace],
    out_path,
    overlay: bool = True,
    column: str = "kl",
) -> Path:
    """Semi-log plot of a divergence column for several traces.

    Line style encodes the flow kind, color the initialization.  With
    overlay=True each distinct (target, init) pair also gets a dotted
    (kappa_2/2) e^{-2t} reference curve when the metadata allows
    reconstructing the densities.
    """
    if not traces:
        raise ValueError("no traces to plot")
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    colors = _init_colors(traces)
    overlaid: set[tuple[str, str]] = set()
    ylabel = {"kl": "KL divergence"}.get(column, column)
    for trace in traces:
        cols = trace.columns()
        if column not in cols:
            raise ValueError(
                f"trace has no column {column!r}; available: {', '.join(cols)}"
            )
        kind = str(trace.meta.get("kind", "?"))
        init_label = str(trace.meta.get("init_label", "init"))
        values = cols[column]
        mask = values > 0
        ax.semilogy(
            trace.t[mask],
            values[mask],
            linestyle=_LINESTYLES.get(kind, "-"),
            color=colors[init_label],
            label=f"{kind} from {init_label}",
        )
        pair_key = (str(trace.meta.get("target_label")), init_label)
        if overlay and column == "kl" and pair_key not in overlaid:
            coeff = _leading_coefficient(trace)
            if coeff is not None and coeff > 0:
                ts = trace.t
                ax.semilogy(
                    ts,
                    coeff * np.exp(-2.0 * ts),
                    linestyle=":",
                    color=colors[init_label],
                    linewidth=1.0,
                    label=f"(kappa_2/2) e^(-2t), {init_label}",
                )
                overlaid.add(pair_key)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.25)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path


def plot_energies(
    potentials: list[tuple[str, Potential | TabulatedPotential]],
    grid: Grid,
    out_path,
) -> Path:
    """Linear plot of potential curves V(x) over one period."""
    if not potentials:
        raise ValueError("no potentials to plot")
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for label, p in potentials:
        ax.plot(grid.points, p.eval(grid), label=label)
    ax.set_xlabel("x")
    ax.set_ylabel("V(x)")
    ax.set_xlim(-math.pi, math.pi)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.25)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path
