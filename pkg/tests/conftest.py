import math

import numpy as np
import pytest

from cmcindex.geometry import AnalyticFamily

ACCEPTANCE_LINES = []


def record_acceptance(name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" :: {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


R_HPM1 = math.sqrt((2 - math.sqrt(2)) / 4)

FAMILIES = {
    "equator2": AnalyticFamily.sphere(2, 1.0),
    "sphere2_08": AnalyticFamily.sphere(2, 0.8),
    "sphere3_05": AnalyticFamily.sphere(3, 0.5),
    "clifford_min2": AnalyticFamily.minimal_clifford(2, 1),
    "clifford2_06": AnalyticFamily.clifford(2, 1, 0.6),
    "clifford2_06_neg": AnalyticFamily.clifford(2, 1, 0.6, orientation=-1),
    "clifford2_045": AnalyticFamily.clifford(2, 1, 0.45),
    "clifford2_h1": AnalyticFamily.clifford(2, 1, R_HPM1),
    "clifford3_1": AnalyticFamily.clifford(3, 1, 0.6),
    "clifford4_2": AnalyticFamily.clifford(4, 2, 0.5),
    "clifford5_3": AnalyticFamily.clifford(5, 3, 0.6),
}


@pytest.fixture(params=sorted(FAMILIES), ids=sorted(FAMILIES))
def family(request):
    return FAMILIES[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
