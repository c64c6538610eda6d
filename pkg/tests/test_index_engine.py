import math

import numpy as np
import pytest

from cmcindex import index_engine
from cmcindex.closed_spectrum import IndexCount
from cmcindex.errors import ParameterError, UnsupportedFamilyError
from cmcindex.geometry import AnalyticFamily
from cmcindex.index_engine import (CASE1, CASE2, CASE3, NOT_APPLICABLE, EngineParams,
                                   builtin_families, classify_case, compute_index, corollary_check,
                                   lemma_gram_check, proposition_check, theorem_check, verify)
from cmcindex.quadrature import QuadratureSpec

R_HPM1 = math.sqrt((2 - math.sqrt(2)) / 4)


def test_compute_index_closed_examples():
    ic = compute_index(AnalyticFamily.from_r2("clifford", 2, "1/2", k=1))
    assert (ic.strong, ic.weak, ic.zero_modes) == (5, 4, 4)
    ic = compute_index(AnalyticFamily.sphere(2, 0.8))
    assert (ic.strong, ic.weak) == (1, 0)


def test_compute_index_errors():
    with pytest.raises(UnsupportedFamilyError):
        compute_index(AnalyticFamily.sphere(2, 0.8), "fem")
    with pytest.raises(UnsupportedFamilyError):
        compute_index(AnalyticFamily.clifford(2, 1, 0.6), "spectral")


def test_engines_agree_on_grid():
    params = EngineParams(mesh=(64, 64))
    for r in np.linspace(0.3, 0.95, 20):
        fam = AnalyticFamily.clifford(2, 1, float(r))
        closed = compute_index(fam, "closed")
        femc = compute_index(fam, "fem", params)
        assert (closed.strong, closed.weak) == (femc.strong, femc.weak), r


def test_proposition_examples():
    lhs, rhs, rel = proposition_check(AnalyticFamily.minimal_clifford(2, 1))
    assert lhs == pytest.approx(-4 * math.pi**2, rel=1e-10)
    assert rel <= 1e-10
    lhs, rhs, rel = proposition_check(AnalyticFamily.sphere(2, 0.8))
    assert abs(lhs) <= 1e-9 and rhs == 0


def test_corollary():
    assert corollary_check(AnalyticFamily.sphere(2, 0.8)) is None
    assert corollary_check(AnalyticFamily.sphere(2, 1.0)) is None
    assert corollary_check(AnalyticFamily.minimal_clifford(2, 1)) == 0
    assert corollary_check(AnalyticFamily.clifford(3, 2, 0.7)) is not None


def test_gram_minimal_torus():
    rep = lemma_gram_check(AnalyticFamily.minimal_clifford(2, 1))
    # psi_i = x_i, int x_i x_j = delta_ij * Area / 4
    np.testing.assert_allclose(rep.gram, np.eye(4) * math.pi**2 / 2, atol=1e-10)
    assert rep.rank == 4


def test_gram_rank_cases():
    assert lemma_gram_check(AnalyticFamily.sphere(2, 1.0)).rank == 3
    assert lemma_gram_check(AnalyticFamily.clifford(4, 2, 0.5)).rank == 6
    assert lemma_gram_check(AnalyticFamily.minimal_clifford(2, 1), rank_tol=math.inf).rank == 0
    with pytest.raises(ParameterError):
        lemma_gram_check(AnalyticFamily.sphere(2, 1.0), rank_tol=0.0)


@pytest.mark.parametrize("args,expected", [
    ((-0.1, 0.5, 0.0, 1.0), NOT_APPLICABLE),
    ((2.0, 1.0, -5.0, 5.0), CASE1),
    ((2.0, 0.0, 0.0, 1.0), CASE2),
    ((2.0, 0.5, -1e-12, 1.0), CASE2),
    ((2.0, 1.5, -3.0, 0.0), CASE3),
    ((2.0, 0.5, -1.0, 1.0), NOT_APPLICABLE),
    ((2.0, 1.5, 0.0, 1.0), NOT_APPLICABLE),
])
def test_classify_case(args, expected):
    assert classify_case(*args, sign_tol=1e-8) == expected


def test_theorem_examples():
    rep = theorem_check(AnalyticFamily.minimal_clifford(2, 1))
    assert rep.case_applied == CASE2
    assert rep.hypothesis_gap == pytest.approx(2)
    assert rep.predicted_lower_bound == 4 and rep.computed_weak_index == 4
    assert rep.consistent

    rep = theorem_check(AnalyticFamily.sphere(2, 0.8))
    assert rep.case_applied == NOT_APPLICABLE and rep.predicted_lower_bound is None
    assert rep.consistent

    rep = theorem_check(AnalyticFamily.clifford(2, 1, R_HPM1))
    assert rep.case_applied == CASE1
    assert rep.abs_h == pytest.approx(1, abs=1e-12)
    assert rep.predicted_lower_bound == 4 and rep.computed_weak_index == 6
    assert rep.proof_step_violation == 0.0 and rep.consistent

    d = rep.to_dict()
    for key in ("hypothesisGap", "absH", "caseApplied", "perBasisIntegralSign",
                "predictedLowerBound", "computedWeakIndex", "consistent"):
        assert key in d


def test_equator_has_no_bound():
    rep = theorem_check(AnalyticFamily.sphere(2, 1.0))
    assert rep.predicted_lower_bound is None and rep.consistent


def test_theorem_inconsistency_detected(monkeypatch):
    monkeypatch.setattr(index_engine, "compute_index", lambda *a, **k: IndexCount(1, 0, 0, 1e-9))
    rep = theorem_check(AnalyticFamily.minimal_clifford(2, 1))
    assert not rep.consistent


def test_theorem_fem_engine():
    rep = theorem_check(AnalyticFamily.minimal_clifford(2, 1), "fem",
                        params=EngineParams(mesh=(48, 48)))
    assert rep.engine == "fem" and rep.computed_weak_index == 4 and rep.consistent


def test_verify_single_family():
    rep = verify(AnalyticFamily.clifford(2, 1, 0.6), QuadratureSpec(128), sample_count=16)
    assert rep.passed, rep.checks
    assert set(rep.checks) >= {"maxHessL", "maxLapF", "maxJPsi", "meanZeroPsi", "proposition",
                               "integralIdentity", "corollary", "lemmaRank"}


def test_builtin_families():
    fams = builtin_families()
    assert len(fams) == len({f.label for f in fams})
    assert any(f.is_umbilical(1e-12) for f in fams)
