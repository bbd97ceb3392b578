"""Experiment configuration: schema, validation, hashing, bundled presets.

Configs are YAML mappings (JSON-style inline fragments work too).  Validation
collects every violation before failing so a bad config is fixed in one pass.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .flow import FLOW_KINDS, PDE_KINDS, cfl_limit
from .grid import make_grid
from .potential import Potential, TabulatedPotential, potential_from_config

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "parse_config",
    "load_config",
    "config_hash",
    "bundled_config_names",
    "resolve_config_path",
]

_ALLOWED_KEYS = {
    "target",
    "inits",
    "flows",
    "n",
    "eps",
    "T",
    "record_dt",
    "q_list",
    "slope_windows",
    "cumulant_order",
    "output_dir",
    "v_derivatives",
    "w_renormalize",
    "force_cfl",
}


class ConfigError(ValueError):
    """Invalid experiment config; problems lists every violation found."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid config:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated sweep description: which flows, from which inits, how long.

    eps, T and slope_windows are resolved to per-flow mappings; slope_windows
    entries may be absent for flows whose slope is not requested.
    """

    target: Potential | TabulatedPotential
    inits: tuple[Potential | TabulatedPotential, ...]
    flows: tuple[str, ...]
    n: int
    eps: dict[str, float | None]
    T: dict[str, float]
    record_dt: float
    q_list: tuple[float, ...]
    slope_windows: dict[str, tuple[float, float]]
    cumulant_order: int
    output_dir: str
    v_derivatives: str
    w_renormalize: bool
    force_cfl: bool


def _per_flow(raw, flows, caster, what, problems, required=True, default=None):
    """Expand a scalar or per-flow mapping into {flow: value}."""
    out = {}
    if isinstance(raw, dict):
        for key in raw:
            if key not in FLOW_KINDS:
                problems.append(f"{what}: unknown flow kind {key!r}")
        for flow in flows:
            if flow in raw:
                try:
                    out[flow] = caster(raw[flow])
                except (TypeError, ValueError):
                    problems.append(f"{what}[{flow}]: not a number: {raw[flow]!r}")
            elif required:
                problems.append(f"{what}: no value for flow {flow}")
            else:
                out[flow] = default
    elif raw is None:
        for flow in flows:
            if required:
                problems.append(f"{what} is required")
                break
            out[flow] = default
    else:
        try:
            value = caster(raw)
        except (TypeError, ValueError):
            problems.append(f"{what}: not a number: {raw!r}")
            value = None
        for flow in flows:
            out[flow] = value
    return out


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a raw mapping and return the resolved config.

    Raises ConfigError listing every violation, not just the first.
    """
    if not isinstance(raw, dict):
        raise ConfigError([f"config root must be a mapping, got {type(raw).__name__}"])
    problems: list[str] = []
    for key in raw:
        if key not in _ALLOWED_KEYS:
            problems.append(f"unknown key {key!r}")

    flows_raw = raw.get("flows")
    flows: tuple[str, ...] = ()
    if not flows_raw:
        problems.append("flows must be non-empty")
    elif not isinstance(flows_raw, (list, tuple)):
        problems.append(f"flows must be a list, got {flows_raw!r}")
    else:
        bad = [f for f in flows_raw if f not in FLOW_KINDS]
        if bad:
            problems.append(f"unknown flows {bad}; known: {', '.join(FLOW_KINDS)}")
        if len(set(flows_raw)) != len(flows_raw):
            problems.append("flows contains duplicates")
        flows = tuple(f for f in flows_raw if f in FLOW_KINDS)

    target: Potential | TabulatedPotential | None = None
    if "target" not in raw:
        problems.append("target is required")
    else:
        try:
            target = potential_from_config(raw["target"])
        except ValueError as exc:
            problems.append(f"target: {exc}")

    inits: list[Potential | TabulatedPotential] = []
    inits_raw = raw.get("inits")
    if not inits_raw or not isinstance(inits_raw, (list, tuple)):
        problems.append("inits must be a non-empty list")
    else:
        for i, spec in enumerate(inits_raw):
            try:
                inits.append(potential_from_config(spec))
            except ValueError as exc:
                problems.append(f"inits[{i}]: {exc}")
        labels = [p.label for p in inits]
        if len(set(labels)) != len(labels):
            problems.append(
                f"inits need distinct names (got {labels}); "
                "add a 'name' to custom potential specs"
            )

    n = raw.get("n", 2000)
    if not isinstance(n, int) or isinstance(n, bool) or n < 8:
        problems.append(f"n must be an integer >= 8, got {n!r}")
        n = 2000

    pde_flows = [f for f in flows if f in PDE_KINDS]
    eps = _per_flow(raw.get("eps"), pde_flows, float, "eps", problems, required=bool(pde_flows))
    for flow, value in eps.items():
        if value is not None and not value > 0:
            problems.append(f"eps[{flow}] must be positive, got {value}")
    eps = {**{f: None for f in flows}, **eps}

    T = _per_flow(raw.get("T"), flows, float, "T", problems, required=True)
    for flow, value in T.items():
        if value is not None and not value > 0:
            problems.append(f"T[{flow}] must be positive, got {value}")

    record_dt = raw.get("record_dt", 0.01)
    try:
        record_dt = float(record_dt)
        if not record_dt > 0:
            problems.append(f"record_dt must be positive, got {record_dt}")
    except (TypeError, ValueError):
        problems.append(f"record_dt: not a number: {record_dt!r}")
        record_dt = 0.01

    q_raw = raw.get("q_list", [2.0])
    q_list: tuple[float, ...] = ()
    if not isinstance(q_raw, (list, tuple)):
        problems.append(f"q_list must be a list, got {q_raw!r}")
    else:
        try:
            q_list = tuple(float(q) for q in q_raw)
            for q in q_list:
                if not q > 1:
                    problems.append(f"q_list entries must exceed 1, got {q}")
        except (TypeError, ValueError):
            problems.append(f"q_list: not numbers: {q_raw!r}")

    windows: dict[str, tuple[float, float]] = {}
    win_raw = raw.get("slope_windows", {})
    if win_raw and not isinstance(win_raw, dict):
        problems.append(f"slope_windows must be a mapping, got {win_raw!r}")
    elif isinstance(win_raw, dict):
        for flow, pair in win_raw.items():
            if flow not in FLOW_KINDS:
                problems.append(f"slope_windows: unknown flow kind {flow!r}")
                continue
            try:
                t1, t2 = (float(v) for v in pair)
            except (TypeError, ValueError):
                problems.append(f"slope_windows[{flow}] must be a (t1, t2) pair, got {pair!r}")
                continue
            if not t1 < t2:
                problems.append(f"slope_windows[{flow}]: need t1 < t2, got ({t1}, {t2})")
            elif flow in T and T[flow] is not None and t2 > T[flow] + 1e-9:
                problems.append(
                    f"slope_windows[{flow}]: window end {t2} exceeds horizon T={T[flow]}"
                )
            windows[flow] = (t1, t2)

    cumulant_order = raw.get("cumulant_order", 8)
    if not isinstance(cumulant_order, int) or isinstance(cumulant_order, bool) or not 2 <= cumulant_order <= 16:
        problems.append(f"cumulant_order must be an integer in [2, 16], got {cumulant_order!r}")
        cumulant_order = 8

    v_derivatives = raw.get("v_derivatives", "analytic")
    if v_derivatives not in ("analytic", "stencil"):
        problems.append(f"v_derivatives must be 'analytic' or 'stencil', got {v_derivatives!r}")
    elif (
        v_derivatives == "analytic"
        and target is not None
        and target.is_numeric
        and any(f in ("W", "WFR") for f in flows)
    ):
        problems.append("tabulated targets only support v_derivatives: stencil")

    w_renormalize = bool(raw.get("w_renormalize", False))
    force_cfl = bool(raw.get("force_cfl", False))
    output_dir = str(raw.get("output_dir", "gradflow_out"))

    if not force_cfl and isinstance(n, int) and n >= 8:
        limit = cfl_limit(make_grid(n))
        for flow in flows:
            if flow in ("W", "WFR") and eps.get(flow) is not None and eps[flow] > limit:
                problems.append(
                    f"eps[{flow}]={eps[flow]:g} exceeds the diffusion stability guard "
                    f"h^2/8 = {limit:g} for n={n}; set force_cfl: true to run anyway"
                )

    for flow in pde_flows:
        e, t_flow = eps.get(flow), T.get(flow)
        if e and t_flow and record_dt > 0:
            if e > record_dt:
                problems.append(f"eps[{flow}]={e:g} exceeds record_dt={record_dt:g}")
            if record_dt > t_flow:
                problems.append(f"record_dt={record_dt:g} exceeds T[{flow}]={t_flow:g}")

    if problems:
        raise ConfigError(problems)
    assert target is not None
    return ExperimentConfig(
        target=target,
        inits=tuple(inits),
        flows=flows,
        n=n,
        eps=eps,
        T=T,
        record_dt=record_dt,
        q_list=q_list,
        slope_windows=windows,
        cumulant_order=cumulant_order,
        output_dir=output_dir,
        v_derivatives=v_derivatives,
        w_renormalize=w_renormalize,
        force_cfl=force_cfl,
    )


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read and validate a YAML config file.

    overrides are merged over the file's keys before validation, so e.g. a
    command-line force_cfl can lift the stability guard the file would trip.
    """
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"not valid YAML: {exc}"]) from None
    raw = dict(raw) if raw is not None else {}
    if overrides:
        raw.update(overrides)
    return parse_config(raw)


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of the semantically meaningful fields (output location excluded)."""
    payload = {
        "target": cfg.target.to_config(),
        "inits": [p.to_config() for p in cfg.inits],
        "flows": list(cfg.flows),
        "n": cfg.n,
        "eps": {k: cfg.eps[k] for k in sorted(cfg.eps)},
        "T": {k: cfg.T[k] for k in sorted(cfg.T)},
        "record_dt": cfg.record_dt,
        "q_list": list(cfg.q_list),
        "slope_windows": {k: list(cfg.slope_windows[k]) for k in sorted(cfg.slope_windows)},
        "cumulant_order": cfg.cumulant_order,
        "v_derivatives": cfg.v_derivatives,
        "w_renormalize": cfg.w_renormalize,
        "force_cfl": cfg.force_cfl,
    }
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def bundled_config_names() -> tuple[str, ...]:
    files = resources.files("gradflow").joinpath("configs")
    return tuple(sorted(p.name[: -len(".yaml")] for p in files.iterdir() if p.name.endswith(".yaml")))


def resolve_config_path(spec: str) -> Path:
    """Interpret --config as a file path or the name of a bundled preset."""
    p = Path(spec)
    if p.exists():
        return p
    if "/" not in spec and "\\" not in spec:
        name = spec[: -len(".yaml")] if spec.endswith(".yaml") else spec
        candidate = resources.files("gradflow").joinpath("configs", f"{name}.yaml")
        if candidate.is_file():
            with resources.as_file(candidate) as real:
                return Path(real)
    raise FileNotFoundError(
        f"config {spec!r} is neither a file nor a bundled preset "
        f"(bundled: {', '.join(bundled_config_names())})"
    )
