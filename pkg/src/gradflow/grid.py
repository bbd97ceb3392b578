"""Uniform periodic grid on [-pi, pi) with quadrature and difference stencils."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Grid", "make_grid", "quadrature", "periodic_gradient", "periodic_laplacian"]


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform mesh x_i = -pi + i*h, i = 0..n-1, h = 2*pi/n.

    The right endpoint pi is identified with -pi; all stencils wrap around.
    """

    n: int
    h: float
    points: np.ndarray

    def __post_init__(self) -> None:
        self.points.flags.writeable = False


def make_grid(n: int) -> Grid:
    """Build the n-point periodic grid on [-pi, pi).

    Parameters
    ----------
    n : int
        Number of mesh points, at least 8.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise TypeError(f"n must be an integer, got {type(n).__name__}")
    if n < 8:
        raise ValueError(f"grid needs at least 8 points, got {n}")
    h = 2.0 * np.pi / n
    points = -np.pi + h * np.arange(n)
    return Grid(n=int(n), h=h, points=points)


def _check_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} values, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("values contain non-finite entries")
    return values


def gradient_into(f: np.ndarray, out: np.ndarray, inv_2h: float) -> None:
    """Central difference (f_{i+1} - f_{i-1}) * inv_2h into a preallocated buffer."""
    np.subtract(f[2:], f[:-2], out=out[1:-1])
    out[0] = f[1] - f[-1]
    out[-1] = f[0] - f[-2]
    out *= inv_2h


def laplacian_into(f: np.ndarray, out: np.ndarray, inv_h2: float) -> None:
    """Three-point stencil (f_{i+1} + f_{i-1} - 2 f_i) * inv_h2 into a buffer."""
    np.add(f[2:], f[:-2], out=out[1:-1])
    out[0] = f[1] + f[-1]
    out[-1] = f[0] + f[-2]
    out -= 2.0 * f
    out *= inv_h2


def quadrature(grid: Grid, values: np.ndarray) -> float:
    """Rectangle-rule integral h * sum(values) over one period.

    For smooth periodic integrands this rule is spectrally accurate, so no
    higher-order scheme is needed.
    """
    values = _check_values(grid, values)
    return float(grid.h * values.sum())


def periodic_gradient(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Central difference (f_{i+1} - f_{i-1}) / (2h) with wrap-around."""
    f = _check_values(grid, values)
    out = np.empty_like(f)
    gradient_into(f, out, 1.0 / (2.0 * grid.h))
    return out


def periodic_laplacian(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Three-point stencil (f_{i+1} + f_{i-1} - 2 f_i) / h^2 with wrap-around."""
    f = _check_values(grid, values)
    out = np.empty_like(f)
    laplacian_into(f, out, 1.0 / (grid.h * grid.h))
    return out
