"""Explicit-Euler integrators for three gradient flows of relative entropy.

All flows evolve the log-density vector x in place.  The birth-death flow is
mirror descent in log space followed by a log-space renormalization; the
transport flow applies the Fokker-Planck right-hand side with periodic
difference stencils and by default does not renormalize (mass drift is a
diagnostic); the combined flow sums both right-hand sides and renormalizes.
The birth-death flow also has a closed-form solution through the geometric
interpolation path, exposed as fr_exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, gradient_into, laplacian_into, make_grid, periodic_gradient, periodic_laplacian
from .measure import LogDensity, chi2, density_fingerprint, from_potential, kl, normalize, renyi
from .potential import Potential, TabulatedPotential
from .trace import FlowTrace

__all__ = [
    "FLOW_KINDS",
    "PDE_KINDS",
    "FlowState",
    "FlowDiverged",
    "CflViolation",
    "RunSpec",
    "init_state",
    "fr_step",
    "w_step",
    "wfr_step",
    "fr_exact",
    "annealing_path",
    "cfl_limit",
    "run",
]

FLOW_KINDS = ("FR", "W", "WFR", "FR_exact")
PDE_KINDS = ("FR", "W", "WFR")

#: Explicit diffusion stepping is refused above this fraction of h^2 unless forced.
CFL_FRACTION = 1.0 / 8.0


class FlowDiverged(RuntimeError):
    """A flow iterate became non-finite (stepsize too large for the grid).

    Carries the failure time t and, when raised by run(), the partial trace.
    """

    def __init__(self, message: str, t: float, trace: FlowTrace | None = None):
        super().__init__(message)
        self.t = t
        self.trace = trace


class CflViolation(ValueError):
    """Stepsize exceeds the diffusion stability heuristic and force was not set."""


@dataclass(eq=False)
class FlowState:
    """Current iterate of one flow: log-density values x after k steps of size eps.

    For the renormalizing kinds x stays normalized within 1e-12 after every
    step.  For the transport flow without renormalization x is left untouched
    (that is the mass-conservation diagnostic); mass_error() reports its
    current deviation from unit mass, while mass_drift accumulates the
    deviations absorbed by renormalizations for the kinds that renormalize.
    """

    kind: str
    grid: Grid
    x: np.ndarray
    step: float | None
    k: int = 0
    mass_drift: float = 0.0
    renormalize: bool = field(default=False)

    @property
    def t(self) -> float:
        if self.step is None:
            return 0.0
        return self.k * self.step

    def density(self) -> LogDensity:
        """Normalized snapshot of the current iterate."""
        return normalize(self.grid, self.x)

    def mass_error(self) -> float:
        """Current |1 - integral of e^x|; inf if the integral overflows."""
        expo = self.x
        m = float(expo.max())
        log_mass = m + math.log(float(np.exp(expo - m).sum())) + math.log(self.grid.h)
        if log_mass > 700.0:
            return math.inf
        return abs(1.0 - math.exp(log_mass))


def init_state(
    kind: str,
    rho0: LogDensity,
    eps: float | None = None,
    renormalize: bool = False,
) -> FlowState:
    """Start a flow of the given kind at rho0."""
    if kind not in FLOW_KINDS:
        raise ValueError(f"unknown flow kind {kind!r}; known: {', '.join(FLOW_KINDS)}")
    if kind in PDE_KINDS:
        if eps is None or not (eps > 0 and math.isfinite(eps)):
            raise ValueError(f"{kind} flow needs a positive finite stepsize, got {eps}")
    return FlowState(
        kind=kind,
        grid=rho0.grid,
        x=rho0.logp.copy(),
        step=eps,
        renormalize=bool(renormalize),
    )


def cfl_limit(grid: Grid) -> float:
    """Largest stepsize the diffusion stability guard accepts for this grid."""
    return CFL_FRACTION * grid.h * grid.h


# In-place step kernels.  The public step functions and the fused loop inside
# run() both go through these, so single-stepping and batch runs produce
# bit-identical iterates.


def _renorm_inplace(x: np.ndarray, logh: float, buf: np.ndarray) -> float:
    """Shift x so quadrature(e^x) = 1; returns the pre-shift |1 - mass|."""
    m = float(x.max())
    np.subtract(x, m, out=buf)
    np.exp(buf, out=buf)
    c = m + logh + math.log(float(buf.sum()))
    x -= c
    if c > 700.0:
        return math.inf
    return abs(1.0 - math.exp(c))


def _fr_kernel(x, ev, om, logh, buf) -> float:
    x *= om
    x -= ev
    return _renorm_inplace(x, logh, buf)


def _transport_into(x, grad_v, lap_v, eps, inv_2h, inv_h2, gx, lx, tmp) -> None:
    """tmp <- eps * (lap_v + lap x + (grad_v + grad x) * grad x), stencil form."""
    gradient_into(x, gx, inv_2h)
    laplacian_into(x, lx, inv_h2)
    np.add(grad_v, gx, out=tmp)
    tmp *= gx
    tmp += lx
    tmp += lap_v
    tmp *= eps


def _wfr_combine(x, ev, om, scaled_transport, logh, buf) -> float:
    x *= om
    x -= ev
    x += scaled_transport
    return _renorm_inplace(x, logh, buf)


def _check_vector(state: FlowState, name: str, vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != state.x.shape:
        raise ValueError(f"{name} has shape {vec.shape}, expected {state.x.shape}")
    return vec


def _check_finite(state: FlowState) -> None:
    if not np.all(np.isfinite(state.x)):
        raise FlowDiverged(
            f"{state.kind} iterate became non-finite at t = {state.t:.6g} "
            "(stepsize too large for this grid?)",
            t=state.t,
        )


def fr_step(state: FlowState, v_star: np.ndarray) -> FlowState:
    """One mirror-descent step x <- x + eps(-v_star - x), then renormalize."""
    if state.kind != "FR":
        raise ValueError(f"fr_step needs an FR state, got {state.kind}")
    v = _check_vector(state, "v_star", v_star)
    eps = state.step
    buf = np.empty_like(state.x)
    state.mass_drift += _fr_kernel(
        state.x, eps * v, 1.0 - eps, math.log(state.grid.h), buf
    )
    state.k += 1
    _check_finite(state)
    return state


def w_step(state: FlowState, grad_v: np.ndarray, lap_v: np.ndarray) -> FlowState:
    """One Fokker-Planck step x <- x + eps(lap v + lap x + (grad v + grad x) grad x).

    No renormalization unless the state was created with renormalize=True;
    the unnormalized iterate is the mass-conservation diagnostic.
    """
    if state.kind != "W":
        raise ValueError(f"w_step needs a W state, got {state.kind}")
    gv = _check_vector(state, "grad_v", grad_v)
    lv = _check_vector(state, "lap_v", lap_v)
    eps = state.step
    h = state.grid.h
    gx, lx, tmp = (np.empty_like(state.x) for _ in range(3))
    _transport_into(state.x, gv, lv, eps, 1.0 / (2.0 * h), 1.0 / (h * h), gx, lx, tmp)
    state.x += tmp
    if state.renormalize:
        state.mass_drift += _renorm_inplace(state.x, math.log(h), gx)
    state.k += 1
    _check_finite(state)
    return state


def wfr_step(state: FlowState, v_star: np.ndarray, grad_v: np.ndarray, lap_v: np.ndarray) -> FlowState:
    """One combined step: transport and birth-death right-hand sides summed, then renormalize."""
    if state.kind != "WFR":
        raise ValueError(f"wfr_step needs a WFR state, got {state.kind}")
    v = _check_vector(state, "v_star", v_star)
    gv = _check_vector(state, "grad_v", grad_v)
    lv = _check_vector(state, "lap_v", lap_v)
    eps = state.step
    h = state.grid.h
    gx, lx, tmp = (np.empty_like(state.x) for _ in range(3))
    _transport_into(state.x, gv, lv, eps, 1.0 / (2.0 * h), 1.0 / (h * h), gx, lx, tmp)
    state.mass_drift += _wfr_combine(
        state.x, eps * v, 1.0 - eps, tmp, math.log(h), gx
    )
    state.k += 1
    _check_finite(state)
    return state


def annealing_path(rho0: LogDensity, pi: LogDensity, tau: float) -> LogDensity:
    """Geometric interpolation: log density proportional to tau log pi + (1-tau) log rho0."""
    if rho0.grid.n != pi.grid.n or rho0.grid.h != pi.grid.h:
        raise ValueError("rho0 and pi live on different grids")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    return normalize(rho0.grid, tau * pi.logp + (1.0 - tau) * rho0.logp)


def fr_exact(rho0: LogDensity, pi: LogDensity, t: float) -> LogDensity:
    """Closed-form birth-death solution: the interpolation path at tau = 1 - e^{-t}."""
    if rho0.grid.n != pi.grid.n or rho0.grid.h != pi.grid.h:
        raise ValueError("rho0 and pi live on different grids")
    if t < 0.0 or not math.isfinite(t):
        raise ValueError(f"t must be a finite nonnegative time, got {t}")
    w0 = math.exp(-t)
    return normalize(rho0.grid, w0 * rho0.logp + (1.0 - w0) * pi.logp)


@dataclass(frozen=True)
class RunSpec:
    """Everything one flow run needs: kind, densities via potentials, schedule.

    v_derivatives selects how the drift terms grad V and lap V are evaluated
    for the transport kinds: "analytic" differentiates the trig terms exactly
    (what the reference slope values use), "stencil" applies the same
    difference stencils as the iterate.  Tabulated potentials only support
    stencil mode.
    """

    kind: str
    target: Potential | TabulatedPotential
    init: Potential | TabulatedPotential
    n: int = 2000
    eps: float | None = None
    T: float = 1.0
    record_dt: float = 0.01
    q_list: tuple[float, ...] = (2.0,)
    v_derivatives: str = "analytic"
    renormalize_w: bool = False
    force_cfl: bool = False


def _validate_spec(spec: RunSpec) -> None:
    problems = []
    if spec.kind not in FLOW_KINDS:
        problems.append(f"unknown flow kind {spec.kind!r}")
    if not spec.T > 0:
        problems.append(f"horizon T must be positive, got {spec.T}")
    if not spec.record_dt > 0:
        problems.append(f"record_dt must be positive, got {spec.record_dt}")
    elif spec.T < spec.record_dt:
        problems.append(f"horizon T={spec.T} is shorter than record_dt={spec.record_dt}")
    if spec.kind in PDE_KINDS:
        if spec.eps is None or not spec.eps > 0:
            problems.append(f"{spec.kind} flow needs a positive stepsize, got {spec.eps}")
        elif spec.record_dt > 0 and spec.eps > spec.record_dt:
            problems.append(f"stepsize {spec.eps} exceeds record_dt {spec.record_dt}")
    for q in spec.q_list:
        if not q > 1:
            problems.append(f"Renyi orders must exceed 1, got {q}")
    if spec.v_derivatives not in ("analytic", "stencil"):
        problems.append(f"v_derivatives must be 'analytic' or 'stencil', got {spec.v_derivatives!r}")
    elif spec.v_derivatives == "analytic" and spec.target.is_numeric and spec.kind in ("W", "WFR"):
        problems.append("tabulated targets only support v_derivatives='stencil'")
    if problems:
        raise ValueError("; ".join(problems))


def _potential_meta(p: Potential | TabulatedPotential) -> dict:
    if p.is_numeric:
        return {"tabulated": True, "n": int(p.values.size)}
    return p.to_config()


def run(spec: RunSpec) -> FlowTrace:
    """Integrate one flow and record divergences every record_dt of flow time.

    Deterministic for a fixed spec.  Non-finite iterates abort the run with
    FlowDiverged carrying the partial trace; finiteness is checked at record
    boundaries, so the reported failure time is the end of the failing block.
    """
    _validate_spec(spec)
    grid = make_grid(spec.n)
    pi = from_potential(spec.target, grid)
    rho0 = from_potential(spec.init, grid)
    qs = tuple(float(q) for q in spec.q_list)

    n_blocks = max(1, round(spec.T / spec.record_dt))
    meta = {
        "kind": spec.kind,
        "target": _potential_meta(spec.target),
        "init": _potential_meta(spec.init),
        "target_label": spec.target.label,
        "init_label": spec.init.label,
        "n": grid.n,
        "h": grid.h,
        "eps": spec.eps if spec.kind in PDE_KINDS else None,
        "T": n_blocks * spec.record_dt,
        "record_dt": spec.record_dt,
        "q_list": list(qs),
        "v_derivatives": spec.v_derivatives if spec.kind in ("W", "WFR") else None,
        "renormalize": bool(spec.renormalize_w) if spec.kind == "W" else None,
        "fingerprint": density_fingerprint(rho0, pi),
    }

    ts: list[float] = []
    kls: list[float] = []
    rqs: dict[float, list[float]] = {q: [] for q in qs}
    chis: list[float] = []
    drifts: list[float] = []

    def record(t: float, rho: LogDensity, drift: float) -> None:
        ts.append(t)
        kls.append(kl(rho, pi))
        for q in qs:
            rqs[q].append(renyi(q, rho, pi))
        chis.append(chi2(rho, pi))
        drifts.append(drift)

    def build_trace() -> FlowTrace:
        return FlowTrace(
            t=np.array(ts),
            kl=np.array(kls),
            renyi={q: np.array(col) for q, col in rqs.items()},
            chi2=np.array(chis),
            mass_drift=np.array(drifts),
            meta=meta,
        )

    if spec.kind == "FR_exact":
        for j in range(n_blocks + 1):
            t = j * spec.record_dt
            record(t, fr_exact(rho0, pi, t), 0.0)
        return build_trace()

    eps = float(spec.eps)
    if spec.kind in ("W", "WFR") and eps > cfl_limit(grid) and not spec.force_cfl:
        raise CflViolation(
            f"stepsize {eps:g} exceeds the diffusion stability guard "
            f"h^2/8 = {cfl_limit(grid):g} for n = {grid.n}; "
            "set force_cfl to run anyway"
        )
    steps_per_block = max(1, round(spec.record_dt / eps))

    state = init_state(spec.kind, rho0, eps, renormalize=spec.renormalize_w)
    x = state.x
    h = grid.h
    logh = math.log(h)
    buf = np.empty_like(x)

    v = spec.target.eval(grid)
    if spec.kind == "FR":
        ev = eps * v
        om = 1.0 - eps
    else:
        if spec.v_derivatives == "analytic":
            gv = spec.target.eval_grad(grid)
            lv = spec.target.eval_laplacian(grid)
        else:
            gv = periodic_gradient(grid, v)
            lv = periodic_laplacian(grid, v)
        inv_2h = 1.0 / (2.0 * h)
        inv_h2 = 1.0 / (h * h)
        gx, lx, tmp = (np.empty_like(x) for _ in range(3))
        if spec.kind == "WFR":
            ev = eps * v
            om = 1.0 - eps

    def row_drift() -> float:
        if spec.kind == "W" and not state.renormalize:
            return state.mass_error()
        return state.mass_drift

    record(0.0, state.density(), row_drift())
    for _ in range(n_blocks):
        drift = 0.0
        if spec.kind == "FR":
            for _ in range(steps_per_block):
                drift += _fr_kernel(x, ev, om, logh, buf)
        elif spec.kind == "W" and not state.renormalize:
            for _ in range(steps_per_block):
                _transport_into(x, gv, lv, eps, inv_2h, inv_h2, gx, lx, tmp)
                x += tmp
        elif spec.kind == "W":
            for _ in range(steps_per_block):
                _transport_into(x, gv, lv, eps, inv_2h, inv_h2, gx, lx, tmp)
                x += tmp
                drift += _renorm_inplace(x, logh, buf)
        else:
            for _ in range(steps_per_block):
                _transport_into(x, gv, lv, eps, inv_2h, inv_h2, gx, lx, tmp)
                drift += _wfr_combine(x, ev, om, tmp, logh, buf)
        state.k += steps_per_block
        state.mass_drift += drift
        if not np.all(np.isfinite(x)):
            row = math.inf
            reason = "non-finite iterate (stepsize too large for this grid?)"
        else:
            row = row_drift()
            reason = "unnormalized mass overflowed (stepsize too large for this grid?)"
        if not math.isfinite(row):
            meta["failed_t"] = state.t
            meta["failed_reason"] = reason
            partial = build_trace()
            raise FlowDiverged(
                f"{spec.kind} run diverged by t = {state.t:.6g}", t=state.t, trace=partial
            )
        record(state.t, state.density(), row)

    return build_trace()
