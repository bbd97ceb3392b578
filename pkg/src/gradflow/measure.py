"""Normalized log-densities on a periodic grid and divergence functionals.

Densities live in log space throughout: the target e^{-V} spans many orders of
magnitude for the study potentials, and Renyi orders up to q = 4 square that
range, so every integral here max-shifts before exponentiating.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .grid import Grid, quadrature
from .potential import Potential, TabulatedPotential

__all__ = [
    "LogDensity",
    "AssumptionReport",
    "normalize",
    "from_potential",
    "uniform",
    "log_normalizer",
    "kl",
    "renyi",
    "chi2",
    "check_assumptions",
    "density_fingerprint",
    "density_to_csv",
]

#: Constructions and renormalizations must hold the unit-mass constraint this tightly.
NORMALIZATION_TOL = 1e-12

#: Divergences this far below zero are round-off and clamp to 0; anything worse raises.
CLAMP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LogDensity:
    """Probability density on a grid, stored as natural-log values.

    Instances are always normalized: quadrature(exp(logp)) = 1 within 1e-12.
    Build them through normalize / from_potential rather than directly.
    """

    grid: Grid
    logp: np.ndarray

    def __post_init__(self) -> None:
        if self.logp.shape != (self.grid.n,):
            raise ValueError(
                f"logp has shape {self.logp.shape}, expected ({self.grid.n},)"
            )
        if not np.all(np.isfinite(self.logp)):
            raise ValueError("logp contains non-finite entries")
        self.logp.flags.writeable = False
        assert abs(quadrature(self.grid, np.exp(self.logp)) - 1.0) <= NORMALIZATION_TOL, (
            "LogDensity constructed from unnormalized values; use normalize()"
        )

    def p(self) -> np.ndarray:
        return np.exp(self.logp)


def _log_quadrature_exp(grid: Grid, expo: np.ndarray) -> float:
    """log of quadrature(e^expo), max-shifted so no overflow occurs."""
    m = float(expo.max())
    return m + float(np.log(np.exp(expo - m).sum() * grid.h))


def normalize(grid: Grid, raw_logp: np.ndarray) -> LogDensity:
    """Subtract the log-normalizer so the result integrates to one."""
    raw = np.asarray(raw_logp, dtype=float)
    if raw.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} log-density values, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise ValueError("log-density values contain non-finite entries")
    return LogDensity(grid, raw - _log_quadrature_exp(grid, raw))


def from_potential(p: Potential | TabulatedPotential, grid: Grid) -> LogDensity:
    """Gibbs density proportional to e^{-V} for the given potential."""
    return normalize(grid, -p.eval(grid))


def uniform(grid: Grid) -> LogDensity:
    """Uniform density 1/(2 pi) on the period."""
    return LogDensity(grid, np.full(grid.n, -np.log(2.0 * np.pi)))


def log_normalizer(p: Potential | TabulatedPotential, grid: Grid) -> float:
    """log of the partition integral of e^{-V}, max-shifted."""
    return _log_quadrature_exp(grid, -p.eval(grid))


def _check_pair(rho: LogDensity, pi: LogDensity) -> None:
    if rho.grid.n != pi.grid.n or rho.grid.h != pi.grid.h:
        raise ValueError(
            f"grid mismatch: {rho.grid.n} points vs {pi.grid.n} points"
        )


def _clamp(value: float, what: str) -> float:
    if value < -CLAMP_TOL:
        raise ValueError(
            f"{what} = {value:.3e} is negative beyond round-off; "
            "this indicates a normalization bug"
        )
    return max(value, 0.0)


def kl(rho: LogDensity, pi: LogDensity) -> float:
    """Relative entropy integral of log(rho/pi) d rho; tiny negatives clamp to 0."""
    _check_pair(rho, pi)
    diff = rho.logp - pi.logp
    value = quadrature(rho.grid, diff * np.exp(rho.logp))
    return _clamp(value, "kl")


def renyi(q: float, rho: LogDensity, pi: LogDensity) -> float:
    """Renyi divergence of order q > 1 with respect to pi."""
    _check_pair(rho, pi)
    if not q > 1.0:
        raise ValueError(f"Renyi order must exceed 1, got {q}")
    if not np.isfinite(q):
        raise ValueError("Renyi order must be finite")
    expo = q * rho.logp - (q - 1.0) * pi.logp
    value = _log_quadrature_exp(rho.grid, expo) / (q - 1.0)
    return _clamp(value, f"renyi({q})")


def chi2(rho: LogDensity, pi: LogDensity) -> float:
    """Chi-squared divergence, the variance of rho/pi under pi."""
    _check_pair(rho, pi)
    expo = 2.0 * rho.logp - pi.logp
    value = np.exp(_log_quadrature_exp(rho.grid, expo)) - 1.0
    return _clamp(value, "chi2")


@dataclass(frozen=True)
class AssumptionReport:
    """Diagnostics for the convergence-theory assumptions.

    a2_margin is the pointwise minimum of log rho0 - (1+alpha) log pi; the
    tail-domination assumption asks for this infimum to be finite (it always
    is on a compact grid with positive densities, so the margin itself is the
    informative part).  m_constant is the sup-norm bound on log(pi/rho0) used
    by earlier one-sided analyses.  a1_mean_potential is the mean of -log pi
    under pi, which equals the mean target potential up to its additive
    log-normalizer; only its finiteness matters.
    """

    alpha: float
    a2_margin: float
    a2_passes: bool
    a1_mean_potential: float
    a1_finite: bool
    m_constant: float


def check_assumptions(rho0: LogDensity, pi: LogDensity, alpha: float = 0.0) -> AssumptionReport:
    """Report margins for the initialization-vs-target tail assumptions."""
    _check_pair(rho0, pi)
    if alpha < 0.0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    a2_margin = float(np.min(rho0.logp - (1.0 + alpha) * pi.logp))
    a1_value = quadrature(pi.grid, -pi.logp * np.exp(pi.logp))
    m_constant = float(np.max(pi.logp - rho0.logp))
    return AssumptionReport(
        alpha=float(alpha),
        a2_margin=a2_margin,
        a2_passes=bool(np.isfinite(a2_margin)),
        a1_mean_potential=a1_value,
        a1_finite=bool(np.isfinite(a1_value)),
        m_constant=m_constant,
    )


def density_fingerprint(rho0: LogDensity, pi: LogDensity) -> str:
    """Short stable hash of an (initialization, target) pair on its grid.

    Used to refuse cross-analysis of artifacts that were produced from
    different density pairs.
    """
    _check_pair(rho0, pi)
    digest = hashlib.sha256()
    digest.update(str(rho0.grid.n).encode())
    digest.update(rho0.logp.tobytes())
    digest.update(pi.logp.tobytes())
    return digest.hexdigest()[:16]


def density_to_csv(ld: LogDensity, path) -> None:
    """Write columns x, logp, p with full double precision."""
    data = np.column_stack([ld.grid.points, ld.logp, np.exp(ld.logp)])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header="x,logp,p", comments="")
