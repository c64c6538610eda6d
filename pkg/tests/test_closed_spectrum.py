import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmcindex.closed_spectrum import (closed_index, harmonic_multiplicity, index_count,
                                      sphere_eigen, stability_modes, weak_index_sweep)
from cmcindex.errors import InsufficientCountError, ParameterError
from cmcindex.geometry import AnalyticFamily


def series_multiplicities(m, count):
    """Coefficients of (1 + t) / (1 - t)^m by repeated prefix sums."""
    c = np.zeros(count, dtype=object)
    c[0] = 1
    c[1] = 1
    for _ in range(m):
        c = np.cumsum(c)
    return [int(x) for x in c]


def brute_torus_n2(r, zero_tol=1e-9, span=40):
    """Count -J eigenvalues on S^1(a) x S^1(b) from all Fourier pairs (p, q) in Z^2."""
    a2, b2 = r * r, 1 - r * r
    pot = b2 / a2 + a2 / b2 + 2
    strong = zero = 0
    for p, q in itertools.product(range(-span, span + 1), repeat=2):
        mu = p * p / a2 + q * q / b2 - pot
        strong += mu < -zero_tol
        zero += abs(mu) <= zero_tol
    return strong, strong - 1, zero


@pytest.mark.parametrize("m", [1, 2, 3, 5, 8])
def test_multiplicities_against_generating_function(m):
    expected = series_multiplicities(m, 12)
    assert [harmonic_multiplicity(m, j) for j in range(12)] == expected


def test_sphere_eigen_examples():
    assert sphere_eigen(2, 1.0, 1) == (2.0, 3)
    assert sphere_eigen(2, 1.0, 2) == (6.0, 5)
    assert sphere_eigen(1, 0.5, 3) == (36.0, 2)
    with pytest.raises(ParameterError):
        sphere_eigen(2, 0.0, 1)


def test_minimal_torus_spectrum():
    fam = AnalyticFamily.minimal_clifford(2, 1)
    spec = stability_modes(fam)
    assert spec.exact
    ev = spec.eigenvalues()
    assert ev[:9] == [-4.0, -2.0, -2.0, -2.0, -2.0, 0.0, 0.0, 0.0, 0.0]
    ic = index_count(spec)
    assert (ic.strong, ic.weak, ic.zero_modes) == (5, 4, 4)


@pytest.mark.parametrize("n", range(2, 13))
@pytest.mark.parametrize("r", [0.5, 0.8, 1.0])
def test_spheres(n, r):
    ic = closed_index(AnalyticFamily.sphere(n, r))
    assert (ic.strong, ic.weak) == (1, 0)
    assert ic.zero_modes == n + 1


def test_equator_zero_modes():
    # the n+2 coordinate functions are Jacobi fields of the totally geodesic sphere
    for n in (2, 4, 7):
        assert closed_index(AnalyticFamily.sphere(n, 1.0)).zero_modes == n + 1


@pytest.mark.parametrize("n", range(2, 13))
def test_minimal_clifford_all_k(n):
    for k in range(1, n):
        ic = closed_index(AnalyticFamily.minimal_clifford(n, k))
        assert (ic.strong, ic.weak) == (n + 3, n + 2)


@pytest.mark.parametrize("r,expected", [(0.45, (7, 6)), (0.6, (5, 4)), (0.87, (7, 6)),
                                        (1 / math.sqrt(2), (5, 4))])
def test_torus_examples(r, expected):
    ic = closed_index(AnalyticFamily.clifford(2, 1, r))
    assert (ic.strong, ic.weak) == expected


def test_exact_boundary_zero_modes():
    ic = closed_index(AnalyticFamily.from_r2("clifford", 2, "1/4", k=1))
    assert (ic.strong, ic.weak, ic.zero_modes) == (5, 4, 6)
    ic = closed_index(AnalyticFamily.from_r2("clifford", 2, "3/4", k=1))
    assert (ic.strong, ic.weak, ic.zero_modes) == (5, 4, 6)


@settings(max_examples=40, deadline=None)
@given(st.fractions(Fraction(1, 50), Fraction(49, 50), max_denominator=97),
       st.integers(2, 7))
def test_translation_modes_are_exactly_zero(r2, n):
    k = 1 + (r2.denominator % (n - 1))
    spec = stability_modes(AnalyticFamily.from_r2("clifford", n, r2, k=k))
    modes = {m.label: m for m in spec.modes}
    assert modes[(1, 1)].eigenvalue == 0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.12, 0.97))
def test_against_fourier_brute_force(r):
    ic = closed_index(AnalyticFamily.clifford(2, 1, r))
    assert (ic.strong, ic.weak, ic.zero_modes) == brute_torus_n2(r)


@pytest.mark.parametrize("r", [0.2, 0.45, 0.6, 0.9])
def test_cutoff_does_not_change_counts(r):
    fam = AnalyticFamily.clifford(3, 1, r)
    counts = {closed_index(fam, cutoff=c).to_dict().__repr__() for c in (0.5, 1.0, 5.0, 40.0)}
    assert len(counts) == 1


def test_invalid_cutoffs():
    fam = AnalyticFamily.clifford(2, 1, 0.6)
    with pytest.raises(ParameterError):
        stability_modes(fam, cutoff=0.0)
    with pytest.raises(InsufficientCountError):
        closed_index(fam, cutoff=1e-3, zero_tol=1e-2)


def test_sweep_matches_individual():
    grid = [0.3, 0.5, 0.7, Fraction(1, 2)]
    rows = weak_index_sweep(2, 1, grid)
    for r, ic in rows[:3]:
        assert ic == closed_index(AnalyticFamily.clifford(2, 1, r))
    assert rows[3][1].zero_modes == 6
    with pytest.raises(ParameterError):
        weak_index_sweep(2, 1, [1.0])


def test_weak_is_strong_minus_constant(family):
    ic = closed_index(family)
    assert ic.weak == ic.strong - 1
