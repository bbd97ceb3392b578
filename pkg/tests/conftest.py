"""Session fixtures: lazily computed reference runs shared across test modules.

The reference sweep is expensive (minutes per transport run at n = 2000), so
a single session-scoped laboratory object computes each run at most once and
caches it.  Tests that touch it are marked slow; deselect with -m "not slow"
for a fast development loop.
"""

import sys
import time

import pytest

from gradflow import RunSpec, build_table, builtin, from_potential, make_grid, run

REFERENCE_EPS = {"V1": 2.5e-6, "V2": 1.0e-6}
REFERENCE_T = {
    ("FR", "V1"): 7.5,
    ("W", "V1"): 7.5,
    ("WFR", "V1"): 7.5,
    ("FR", "V2"): 7.0,
    ("W", "V2"): 3.0,
    ("WFR", "V2"): 2.25,
}
REFERENCE_WINDOWS = {
    ("FR", "V1"): (7.0, 7.5),
    ("WFR", "V1"): (7.0, 7.5),
    ("W", "V1"): (7.0, 7.5),
    ("FR", "V2"): (6.875, 7.0),
    ("WFR", "V2"): (1.875, 2.0),
    ("W", "V2"): (2.75, 2.875),
}
REFERENCE_INITS = {"V1": ("Va", "Vb"), "V2": ("Vc", "Vd")}
RECORD_DT = 0.005


class ReferenceLab:
    """Caches the reference flow runs, closed-form traces and cumulant tables."""

    def __init__(self):
        self._cache = {}

    def _memo(self, key, build):
        if key not in self._cache:
            start = time.perf_counter()
            self._cache[key] = build()
            wall = time.perf_counter() - start
            if wall > 1.0:
                print(f"[lab] {key}: {wall:.1f}s", file=sys.stderr, flush=True)
        return self._cache[key]

    def density(self, name, n=2000):
        return self._memo(
            ("density", name, n), lambda: from_potential(builtin(name), make_grid(n))
        )

    def table(self, target, init, max_order=8):
        return self._memo(
            ("table", target, init, max_order),
            lambda: build_table(self.density(init), self.density(target), max_order),
        )

    def trace(self, kind, target, init):
        def build():
            spec = RunSpec(
                kind=kind,
                target=builtin(target),
                init=builtin(init),
                n=2000,
                eps=REFERENCE_EPS[target],
                T=REFERENCE_T[(kind, target)],
                record_dt=RECORD_DT,
                q_list=(2.0,),
                force_cfl=(target == "V1"),
            )
            return run(spec)

        return self._memo(("trace", kind, target, init), build)

    def exact_trace(self, target, init, T=8.5):
        def build():
            spec = RunSpec(
                kind="FR_exact",
                target=builtin(target),
                init=builtin(init),
                n=2000,
                T=T,
                record_dt=RECORD_DT,
                q_list=(2.0,),
            )
            return run(spec)

        return self._memo(("exact", target, init, T), build)

    def halved_step_trace(self):
        """The (V2, Vd) birth-death run again at half the reference stepsize."""

        def build():
            spec = RunSpec(
                kind="FR",
                target=builtin("V2"),
                init=builtin("Vd"),
                n=2000,
                eps=0.5 * REFERENCE_EPS["V2"],
                T=2.0,
                record_dt=RECORD_DT,
                q_list=(2.0,),
            )
            return run(spec)

        return self._memo(("trace_half", "FR", "V2", "Vd"), build)

    def slope_value(self, kind, target, init):
        from gradflow import slope

        window = REFERENCE_WINDOWS[(kind, target)]
        key = ("slope", kind, target, init)
        return self._memo(
            key, lambda: slope(self.trace(kind, target, init), *window).value
        )


@pytest.fixture(scope="session")
def lab():
    return ReferenceLab()


ACCEPTANCE_RESULTS = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one pass/fail verdict line per acceptance criterion."""

    def record(name, ok, detail=""):
        ok = bool(ok)
        ACCEPTANCE_RESULTS.append((name, ok, detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
