import numpy as np
import pytest

from ppcform.scenario import paper_scenario, run


@pytest.fixture(scope="session")
def bundled_cfg():
    return paper_scenario()


@pytest.fixture(scope="session")
def bundled_run(bundled_cfg):
    """The bundled scenario, simplified plants, seed 0 (shared, read-only)."""
    return run(bundled_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- criterion report

CRITERIA = {
    1: "observer corridor",
    2: "tracking corridor and aux reversion",
    3: "fault-robustness sweep",
    4: "closed-loop identity",
    5: "transform properties",
    6: "graph oracles",
    7: "input-map round trips",
    8: "integrator order and leader",
    9: "fidelity consistency",
    10: "convex-hull containment",
    11: "determinism",
}
_outcomes: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and not rep.failed and not rep.skipped):
        return
    n = marker.args[0]
    detail = dict(item.user_properties).get("detail", "")
    if rep.when == "call" or n not in _outcomes:
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _outcomes[n] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(CRITERIA):
        status, detail = _outcomes.get(n, ("NOT RUN", ""))
        tr.write_line(f"criterion {n:2d} {status:7s} {CRITERIA[n]}" + (f": {detail}" if detail else ""))
