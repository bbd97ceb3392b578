"""Trigonometric-polynomial potentials with exact derivatives, plus builtins.

A potential is a finite sum of terms a*cos(k x) or a*sin(k x).  This family is
closed under differentiation, so gradients and Laplacians are evaluated from
symbolically differentiated term lists rather than difference stencils.
Arbitrary tabulated potentials are accepted as a numeric fallback.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, periodic_gradient, periodic_laplacian

__all__ = [
    "TrigTerm",
    "Potential",
    "TabulatedPotential",
    "builtin",
    "BUILTIN_NAMES",
    "blend",
    "potential_from_config",
]


@dataclass(frozen=True)
class TrigTerm:
    """One term a*cos(k x) or a*sin(k x)."""

    amplitude: float
    kind: str
    frequency: int

    def __post_init__(self) -> None:
        if self.kind not in ("cos", "sin"):
            raise ValueError(f"term kind must be 'cos' or 'sin', got {self.kind!r}")
        if not isinstance(self.frequency, (int, np.integer)) or self.frequency < 1:
            raise ValueError(f"term frequency must be a positive integer, got {self.frequency!r}")

    def derivative(self) -> "TrigTerm":
        a, k = self.amplitude, self.frequency
        if self.kind == "cos":
            return TrigTerm(-a * k, "sin", k)
        return TrigTerm(a * k, "cos", k)

    def eval(self, x: np.ndarray) -> np.ndarray:
        f = np.cos if self.kind == "cos" else np.sin
        return self.amplitude * f(self.frequency * x)


@dataclass(frozen=True)
class Potential:
    """Finite trigonometric polynomial V(x) = sum of TrigTerms."""

    terms: tuple[TrigTerm, ...]
    name: str | None = None

    is_numeric: bool = field(default=False, init=False)

    def eval(self, grid: Grid) -> np.ndarray:
        out = np.zeros(grid.n)
        for term in self.terms:
            out += term.eval(grid.points)
        return out

    def derivative(self) -> "Potential":
        """Symbolic derivative; stays inside the trig-term family."""
        return Potential(tuple(t.derivative() for t in self.terms))

    def eval_grad(self, grid: Grid) -> np.ndarray:
        return self.derivative().eval(grid)

    def eval_laplacian(self, grid: Grid) -> np.ndarray:
        return self.derivative().derivative().eval(grid)

    def to_config(self) -> dict:
        if self.name is not None and self.name in _BUILTINS:
            return {"builtin": self.name}
        out: dict = {
            "terms": [
                {"a": t.amplitude, "kind": t.kind, "k": t.frequency} for t in self.terms
            ]
        }
        if self.name is not None:
            out["name"] = self.name
        return out

    @property
    def label(self) -> str:
        return self.name if self.name is not None else "custom"


@dataclass(frozen=True)
class TabulatedPotential:
    """Potential given by values on a fixed grid; derivatives use stencils.

    Flagged as numeric so downstream outputs can record that its derivatives
    carry O(h^2) stencil error rather than being exact.
    """

    values: np.ndarray
    name: str | None = None

    is_numeric: bool = field(default=True, init=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 8:
            raise ValueError("tabulated potential needs a 1-D vector of at least 8 values")
        if not np.all(np.isfinite(values)):
            raise ValueError("tabulated potential contains non-finite values")
        object.__setattr__(self, "values", values)
        self.values.flags.writeable = False

    def _check(self, grid: Grid) -> None:
        if self.values.shape != (grid.n,):
            raise ValueError(
                f"tabulated potential has {self.values.size} values but grid has {grid.n} points"
            )

    def eval(self, grid: Grid) -> np.ndarray:
        self._check(grid)
        return self.values.copy()

    def eval_grad(self, grid: Grid) -> np.ndarray:
        self._check(grid)
        return periodic_gradient(grid, self.values)

    def eval_laplacian(self, grid: Grid) -> np.ndarray:
        self._check(grid)
        return periodic_laplacian(grid, self.values)

    def to_config(self) -> dict:
        return {"values": self.values.tolist()}

    @property
    def label(self) -> str:
        return self.name if self.name is not None else "numeric"


def _trig(*terms: tuple[float, str, int]) -> tuple[TrigTerm, ...]:
    return tuple(TrigTerm(a, kind, k) for a, kind, k in terms)


_BUILTINS: dict[str, tuple[TrigTerm, ...]] = {
    "V1": _trig((2.5, "cos", 2), (0.5, "sin", 1)),
    "V2": _trig((-6.0, "cos", 1)),
    "Va": _trig((-2.5, "cos", 2), (-0.5, "sin", 1)),
    "Vb": _trig((2.5, "cos", 2)),
    "Vc": _trig((6.0, "cos", 1)),
    "Vd": (),
}

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin(name: str) -> Potential:
    """Look up one of the named study potentials (V1, V2, Va, Vb, Vc, Vd)."""
    try:
        terms = _BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown builtin potential {name!r}; known: {', '.join(_BUILTINS)}") from None
    return Potential(terms, name=name)


def blend(p: Potential, q: Potential, weight: float) -> Potential:
    """Affine combination (1 - weight) * p + weight * q, merged term by term."""
    merged: dict[tuple[str, int], float] = {}
    for term in p.terms:
        merged[(term.kind, term.frequency)] = merged.get((term.kind, term.frequency), 0.0) + (
            1.0 - weight
        ) * term.amplitude
    for term in q.terms:
        merged[(term.kind, term.frequency)] = merged.get((term.kind, term.frequency), 0.0) + (
            weight * term.amplitude
        )
    terms = tuple(
        TrigTerm(a, kind, k) for (kind, k), a in sorted(merged.items()) if a != 0.0
    )
    return Potential(terms)


def potential_from_config(obj: dict | str) -> Potential | TabulatedPotential:
    """Parse a potential description.

    Accepts a builtin name (``"V1"`` or ``{"builtin": "V1"}``), an explicit
    term list ``{"terms": [{"a": 2.5, "kind": "cos", "k": 2}, ...]}``, or
    tabulated values ``{"values": [...]}``.
    """
    if isinstance(obj, str):
        return builtin(obj)
    if not isinstance(obj, dict):
        raise ValueError(f"potential config must be a name or mapping, got {type(obj).__name__}")
    keys = {"builtin", "terms", "values"} & obj.keys()
    if len(keys) != 1:
        raise ValueError(
            "potential config needs exactly one of 'builtin', 'terms', 'values'; "
            f"got keys {sorted(obj.keys())}"
        )
    if "builtin" in obj:
        return builtin(obj["builtin"])
    if "terms" in obj:
        terms = []
        for i, t in enumerate(obj["terms"]):
            try:
                terms.append(TrigTerm(float(t["a"]), str(t["kind"]), int(t["k"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"bad trig term at index {i}: {t!r} ({exc})") from None
        name = obj.get("name")
        return Potential(tuple(terms), name=None if name is None else str(name))
    return TabulatedPotential(np.asarray(obj["values"], dtype=float))
