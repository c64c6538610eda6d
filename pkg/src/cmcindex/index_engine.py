"""Index computations and checks of the psi_v test-function arguments.

The canonical basis e_1..e_{n+2} gives the test functions
``psi_i = l_{e_i} - H f_{e_i}``.  Everything below is evaluated through
the (n+2)x(n+2) basis integral matrices of :mod:`cmcindex.support`, so a
quantity quadratic in v (such as ``int |grad l_v|^2 - n int l_v^2``) is
decided for every v at once by the eigenvalues of its matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import closed_spectrum, fem
from .closed_spectrum import IndexCount
from .errors import ParameterError, UnsupportedFamilyError
from .geometry import AnalyticFamily, curvature_invariants
from .quadrature import QuadratureSpec
from .support import (basis_integrals, basis_vector, identity_residuals, integral_identity_check,
                      mean_zero_check, psi, q_form)

ENGINES = ("closed", "fem")
UMBILIC_TOL = 1e-12
H_TOL = 1e-9
SIGN_TOL = 1e-8

CASE1 = "Case1_Hpm1"
CASE2 = "Case2_intIneqGe_Hle1"
CASE3 = "Case3_intIneqLe_Hge1"
NOT_APPLICABLE = "NotApplicable"


@dataclass
class EngineParams:
    cutoff: float = 1.0
    zero_tol: Optional[float] = None
    mesh: tuple = (64, 64)

    def tol_for(self, engine: str) -> float:
        if self.zero_tol is not None:
            return self.zero_tol
        return closed_spectrum.DEFAULT_ZERO_TOL if engine == "closed" else fem.DEFAULT_ZERO_TOL


def compute_index(family: AnalyticFamily, engine: str = "closed",
                  params: Optional[EngineParams] = None) -> IndexCount:
    params = params or EngineParams()
    tol = params.tol_for(engine)
    if engine == "closed":
        return closed_spectrum.closed_index(family, params.cutoff, tol)
    if engine == "fem":
        pencil = fem.assemble(family, fem.build_mesh(*params.mesh))
        spec = fem.solve_until_complete(pencil, tol)
        strong, zero = fem.negative_count(spec, tol)
        weak = fem.weak_negative_count(pencil, spec, tol)
        return IndexCount(strong, weak, zero, tol)
    raise UnsupportedFamilyError(f"unknown engine {engine!r}; expected one of {ENGINES}")


# -------------------------------------------------------------------------
# basis-vector identities

def _default_quad(family: AnalyticFamily, quad: Optional[QuadratureSpec]) -> QuadratureSpec:
    return quad if quad is not None else QuadratureSpec.for_dimension(family.n)


def proposition_check(family: AnalyticFamily, quad: Optional[QuadratureSpec] = None):
    """``(lhs, rhs, rel_residual)`` for ``sum_i Q(psi_{e_i}) = -int |phi|^2``."""
    quad = _default_quad(family, quad)
    lhs = sum(q_form(family, psi(family, basis_vector(family, i)), quad)
              for i in range(family.ambient_dim))
    inv = curvature_invariants(family)
    rhs = -inv.norm_phi2 * basis_integrals(family, quad).area
    return lhs, rhs, abs(lhs - rhs) / (1.0 + abs(rhs))


def corollary_check(family: AnalyticFamily, quad: Optional[QuadratureSpec] = None) -> Optional[int]:
    """Index i (0-based) of a basis vector with ``Q(psi_{e_i}) < 0``, or None."""
    quad = _default_quad(family, quad)
    if family.is_umbilical(UMBILIC_TOL):
        return None
    scale = family.area()
    for i in range(family.ambient_dim):
        if q_form(family, psi(family, basis_vector(family, i)), quad) < -SIGN_TOL * scale:
            return i
    return None


@dataclass(frozen=True)
class GramReport:
    gram: np.ndarray
    rank: int
    rank_tol: float
    eigenvalues: np.ndarray

    def to_dict(self) -> dict:
        return {"gram": self.gram.tolist(), "rank": self.rank, "rankTol": self.rank_tol,
                "eigenvalues": self.eigenvalues.tolist()}


def lemma_gram_check(family: AnalyticFamily, quad: Optional[QuadratureSpec] = None,
                     rank_tol: float = 1e-8) -> GramReport:
    """L2 Gram matrix of psi_{e_1}..psi_{e_{n+2}} and its numerical rank."""
    if not rank_tol > 0:
        raise ParameterError("rankTol must be > 0")
    gram = basis_integrals(family, _default_quad(family, quad)).psi_psi
    gram = 0.5 * (gram + gram.T)
    w = np.linalg.eigvalsh(gram)
    top = max(float(w.max()), 0.0)
    rank = 0 if math.isinf(rank_tol) else int(np.sum(w > rank_tol * top))
    return GramReport(gram, rank, rank_tol, w)


# -------------------------------------------------------------------------
# theorem hypotheses and conclusion

@dataclass
class TheoremReport:
    family: str
    hypothesis_gap: float
    abs_h: float
    case_applied: str
    per_basis_integral_sign: list
    margin_min: float              # min over unit v of int |grad l_v|^2 - n int l_v^2
    margin_max: float
    predicted_lower_bound: Optional[int]
    computed_weak_index: int
    proof_step_violation: Optional[float] = None   # Case 1 only
    engine: str = "closed"
    extra: dict = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        if self.proof_step_violation is not None and self.proof_step_violation > 0:
            return False
        if self.predicted_lower_bound is None:
            return True
        return self.computed_weak_index >= self.predicted_lower_bound

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "hypothesisGap": self.hypothesis_gap,
            "absH": self.abs_h,
            "caseApplied": self.case_applied,
            "perBasisIntegralSign": list(self.per_basis_integral_sign),
            "marginMin": self.margin_min,
            "marginMax": self.margin_max,
            "predictedLowerBound": self.predicted_lower_bound,
            "computedWeakIndex": self.computed_weak_index,
            "weak": self.computed_weak_index,
            "proofStepViolation": self.proof_step_violation,
            "consistent": self.consistent,
            "engine": self.engine,
        }


def classify_case(hypothesis_gap: float, abs_h: float, margin_min: float, margin_max: float,
                  sign_tol: float) -> str:
    """Which case of the theorem has its hypotheses met (non-strict comparisons)."""
    if hypothesis_gap < -H_TOL:
        return NOT_APPLICABLE
    if abs(abs_h - 1.0) <= H_TOL:
        return CASE1
    if abs_h <= 1.0 + H_TOL and margin_min >= -sign_tol:
        return CASE2
    if abs_h >= 1.0 - H_TOL and margin_max <= sign_tol:
        return CASE3
    return NOT_APPLICABLE


def theorem_check(family: AnalyticFamily, engine: str = "closed",
                  quad: Optional[QuadratureSpec] = None,
                  params: Optional[EngineParams] = None) -> TheoremReport:
    quad = _default_quad(family, quad)
    n = family.n
    inv = curvature_invariants(family)
    ints = basis_integrals(family, quad)
    margin = ints.grad_ll - n * ints.ll
    margin = 0.5 * (margin + margin.T)
    w = np.linalg.eigvalsh(margin)
    # integral comparisons are scaled by the largest int l_v^2 over unit v
    sign_tol = SIGN_TOL * float(np.linalg.eigvalsh(ints.ll).max())
    case = classify_case(inv.hypothesis_gap, inv.abs_h, float(w.min()), float(w.max()), sign_tol)

    non_umbilical = inv.norm_phi2 > UMBILIC_TOL
    bound = n + 2 if (case != NOT_APPLICABLE and non_umbilical) else None

    violation = None
    if case == CASE1:
        # Q(psi_v) <= -n int f_v^2 for every v: the matrix Q_psi + n FF must be <= 0
        step = ints.q_psi + n * ints.ff
        step = 0.5 * (step + step.T)
        scale = 1e-8 * (1.0 + float(np.abs(ints.q_psi).max()))
        violation = max(0.0, float(np.linalg.eigvalsh(step).max()) - scale)

    weak = compute_index(family, engine, params).weak
    return TheoremReport(family.label, inv.hypothesis_gap, inv.abs_h, case,
                         [float(x) for x in np.diag(margin)], float(w.min()), float(w.max()),
                         bound, weak, violation, engine)


# -------------------------------------------------------------------------
# full identity suite

@dataclass
class VerifyReport:
    checks: dict     # name -> {"pass": bool, "value": float, "tol": float}

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks.values())


def verify(family: AnalyticFamily, quad: Optional[QuadratureSpec] = None, sample_count: int = 64,
           seed: int = 0) -> VerifyReport:
    """Run every pointwise and integral identity check on one family."""
    quad = _default_quad(family, quad)
    rng = np.random.default_rng(seed)
    dim = family.ambient_dim
    vectors = [basis_vector(family, i) for i in range(dim)] + [rng.normal(size=dim)]
    checks = {}

    def record(name, value, tol):
        checks[name] = {"pass": bool(value <= tol), "value": float(value), "tol": tol}

    worst = {}
    for v in vectors:
        rep = identity_residuals(family, v, sample_count, seed=seed)
        for key, val in rep.fields().items():
            worst[key] = max(worst.get(key, 0.0), val)
    for key, val in worst.items():
        record(key, val, 1e-5)

    record("meanZeroPsi", max(mean_zero_check(family, v, quad) for v in vectors), 1e-10)
    _, _, prop_res = proposition_check(family, quad)
    record("proposition", prop_res, 1e-6)
    record("integralIdentity",
           max(integral_identity_check(family, v, quad)[2] for v in vectors), 1e-8)

    witness = corollary_check(family, quad)
    checks["corollary"] = {"pass": (witness is not None) == (not family.is_umbilical(UMBILIC_TOL)),
                           "value": -1 if witness is None else witness, "tol": 0}
    gram = lemma_gram_check(family, quad)
    expected_rank = family.n + 2 if not family.is_umbilical(UMBILIC_TOL) else family.n + 1
    checks["lemmaRank"] = {"pass": gram.rank == expected_rank, "value": gram.rank,
                           "tol": expected_rank}
    return VerifyReport(checks)


def builtin_families() -> list[AnalyticFamily]:
    """Families exercised by the identity and theorem suites."""
    r_h1 = math.sqrt((2 - math.sqrt(2)) / 4)
    return [
        AnalyticFamily.sphere(2, 1.0),
        AnalyticFamily.sphere(2, 0.8),
        AnalyticFamily.sphere(3, 0.5),
        AnalyticFamily.minimal_clifford(2, 1),
        AnalyticFamily.clifford(2, 1, 0.6),
        AnalyticFamily.clifford(2, 1, 0.45),
        AnalyticFamily.clifford(2, 1, r_h1),
        AnalyticFamily.clifford(2, 1, 0.6, orientation=-1),
        AnalyticFamily.minimal_clifford(3, 1),
        AnalyticFamily.clifford(3, 2, 0.7),
        AnalyticFamily.clifford(4, 2, 0.5),
    ]
