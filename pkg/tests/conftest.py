import logging

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import scnet.attack
import scnet.cli
from scnet.graph import FirmAttrs, build_graph

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

T1_EDGES = [("M1", "A"), ("M2", "B"), ("A", "C"), ("A", "D"), ("B", "D"), ("B", "E")]
T2_EDGES = [("M1", "A"), ("A", "B"), ("B", "C"), ("C", "B")]


def msf(fid, **kw):
    return FirmAttrs(fid, is_msf=True, **kw)


@pytest.fixture
def t1():
    nodes = [msf("M1"), msf("M2")] + [FirmAttrs(x) for x in "ABCDE"]
    return build_graph(T1_EDGES, nodes)


@pytest.fixture
def t2():
    return build_graph(T2_EDGES, [msf("M1")] + [FirmAttrs(x) for x in "ABC"])


# Every ensemble produced anywhere in the suite is checked for monotone
# per-realization curves and ordered bands.
ENSEMBLE_LOG = {"runs": 0, "violations": 0}
_real_run_ensemble = scnet.attack.run_ensemble


def ensemble_violations(res) -> int:
    bad = 0
    for i in range(res.curves.shape[1] - 1):  # skip SCFR, which rises by definition
        d = np.diff(res.curves[:, i, :], axis=1)
        bad += int((d > 0).sum())
    for m in res.mean:
        bad += int((res.p2_5[m] > res.mean[m]).sum() + (res.mean[m] > res.p97_5[m]).sum())
    return bad


def _checked_run_ensemble(*args, **kwargs):
    res = _real_run_ensemble(*args, **kwargs)
    ENSEMBLE_LOG["runs"] += 1
    bad = ensemble_violations(res)
    ENSEMBLE_LOG["violations"] += bad
    assert bad == 0, f"ensemble {res.scale.value}/{res.strategy.value}: {bad} monotonicity/band violations"
    return res


scnet.attack.run_ensemble = _checked_run_ensemble
scnet.cli.run_ensemble = _checked_run_ensemble
scnet.run_ensemble = _checked_run_ensemble


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.ERROR, logger="scnet")


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py::test_criterion_" not in getattr(rep, "nodeid", "") or rep.when != "call":
                continue
            props = dict(rep.user_properties)
            num = int(rep.nodeid.split("test_criterion_")[1][:2])
            lines.append((num, outcome, props.get("detail", "no detail recorded")))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num, outcome, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if outcome == 'passed' else 'FAIL'}  {detail}")
    terminalreporter.write_line(f"ensembles checked for monotonicity/bands: {ENSEMBLE_LOG['runs']}, "
                                f"violations: {ENSEMBLE_LOG['violations']}")
