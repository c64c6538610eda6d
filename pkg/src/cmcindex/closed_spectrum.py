"""Exact stability spectra of round spheres and Clifford tori.

Eigenfunctions of the Laplacian on ``S^k(a) x S^{n-k}(b)`` are products of
spherical harmonics, so the stability operator ``-J = -Delta - (|A|^2 + n)``
has eigenvalues

    mu(p, q) = p(p+k-1)/a^2 + q(q+n-k-1)/b^2 - (|A|^2 + n)

with multiplicity ``mult_k(p) * mult_{n-k}(q)``.  When the family carries an
exact rational ``r^2`` every eigenvalue is computed in rational arithmetic
and zero modes are classified exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Union

from .errors import InsufficientCountError, ParameterError
from .geometry import CLIFFORD, SPHERE, AnalyticFamily, curvature_invariants

DEFAULT_ZERO_TOL = 1e-9

Number = Union[float, Fraction]


def harmonic_multiplicity(m: int, j: int) -> int:
    """Dimension of degree-``j`` spherical harmonics on ``S^m``."""
    if j < 0:
        return 0
    if j == 0:
        return 1
    if j == 1:
        return m + 1
    return comb(m + j, j) - comb(m + j - 2, j - 2)


def sphere_eigen(m: int, radius: float, j: int) -> tuple[float, int]:
    """Laplace eigenvalue ``j(j+m-1)/radius^2`` on ``S^m(radius)`` and its multiplicity."""
    if m < 1 or radius <= 0 or j < 0:
        raise ParameterError("need m >= 1, radius > 0, j >= 0")
    return j * (j + m - 1) / radius**2, harmonic_multiplicity(m, j)


@dataclass(frozen=True)
class Mode:
    label: tuple
    eigenvalue: Number
    multiplicity: int

    @property
    def is_constant(self) -> bool:
        return all(x == 0 for x in self.label)


@dataclass
class ModeSpectrum:
    modes: list[Mode]
    potential: Number
    cutoff: float
    exact: bool = False
    family_label: str = ""

    def eigenvalues(self) -> list[float]:
        """Stability eigenvalues repeated by multiplicity."""
        out = []
        for mode in self.modes:
            out.extend([float(mode.eigenvalue)] * mode.multiplicity)
        return out


@dataclass(frozen=True)
class IndexCount:
    strong: int
    weak: int
    zero_modes: int
    zero_tol: float

    def to_dict(self) -> dict:
        return {"strong": self.strong, "weak": self.weak, "zeroModes": self.zero_modes}


def _exact_setup(family: AnalyticFamily):
    """Factor data and potential |A|^2 + n in rational arithmetic."""
    n, r2 = family.n, family.r2
    if family.kind == SPHERE:
        # |A|^2 = n (1 - r^2) / r^2
        return [(n, 1 / r2)], n / r2
    k = family.k
    a2, b2 = r2, 1 - r2
    potential = k * b2 / a2 + (n - k) * a2 / b2 + n
    return [(k, 1 / a2), (n - k, 1 / b2)], potential


def _float_setup(family: AnalyticFamily):
    inv = curvature_invariants(family)
    return [(m, 1.0 / radius**2) for m, radius in family.factors], inv.norm_a2 + family.n


def stability_modes(family: AnalyticFamily, cutoff: float = 1.0) -> ModeSpectrum:
    """All stability modes with eigenvalue ``<= cutoff``.

    The Laplace eigenvalue of each factor increases with the degree, so the
    enumeration stops per factor once that factor alone exceeds the bound.
    """
    if not cutoff > 0:
        raise ParameterError("cutoff must be > 0")
    exact = family.r2 is not None
    factors, potential = _exact_setup(family) if exact else _float_setup(family)
    bound = Fraction(cutoff) + potential if exact else cutoff + potential

    per_factor = []
    for m, inv_r2 in factors:
        levels = []
        j = 0
        while True:
            lam = j * (j + m - 1) * inv_r2
            if lam > bound:
                break
            levels.append((j, lam, harmonic_multiplicity(m, j)))
            j += 1
        per_factor.append(levels)

    modes = []
    if len(per_factor) == 1:
        for j, lam, mult in per_factor[0]:
            modes.append(Mode((j,), lam - potential, mult))
    else:
        for p, lam1, m1 in per_factor[0]:
            for q, lam2, m2 in per_factor[1]:
                if lam1 + lam2 <= bound:
                    modes.append(Mode((p, q), lam1 + lam2 - potential, m1 * m2))
    modes.sort(key=lambda md: (md.eigenvalue, md.label))
    return ModeSpectrum(modes, potential, float(cutoff), exact, family.label)


def index_count(spectrum: ModeSpectrum, zero_tol: float = DEFAULT_ZERO_TOL) -> IndexCount:
    """Strong and weak index from a mode table.

    Constants are exact eigenfunctions with eigenvalue ``-(|A|^2 + n) < 0``
    and the mean-zero functions are their orthogonal complement, so the weak
    index is the strong index minus the constant mode.
    """
    if spectrum.cutoff <= zero_tol:
        raise InsufficientCountError(
            f"cutoff {spectrum.cutoff} does not exceed zeroTol {zero_tol}")
    strong = zero = const = 0
    for mode in spectrum.modes:
        mu = mode.eigenvalue
        if spectrum.exact:
            negative, is_zero = mu < 0, mu == 0
        else:
            negative, is_zero = mu < -zero_tol, abs(mu) <= zero_tol
        if negative:
            strong += mode.multiplicity
            if mode.is_constant:
                const += mode.multiplicity
        elif is_zero:
            zero += mode.multiplicity
    return IndexCount(strong, strong - const, zero, 0.0 if spectrum.exact else zero_tol)


def closed_index(family: AnalyticFamily, cutoff: float = 1.0,
                 zero_tol: float = DEFAULT_ZERO_TOL) -> IndexCount:
    return index_count(stability_modes(family, cutoff), zero_tol)


def weak_index_sweep(n: int, k: int, r_grid, cutoff: float = 1.0,
                     zero_tol: float = DEFAULT_ZERO_TOL) -> list[tuple[float, IndexCount]]:
    """Index counts of ``S^k(r) x S^{n-k}(sqrt(1-r^2))`` along a radius grid."""
    out = []
    for r in r_grid:
        if isinstance(r, Fraction):
            fam = AnalyticFamily.from_r2(CLIFFORD, n, r * r, k)
        else:
            r = float(r)
            if not 0 < r < 1:
                raise ParameterError(f"sweep radius {r} outside (0, 1)")
            fam = AnalyticFamily.clifford(n, k, r)
        out.append((fam.r, closed_index(fam, cutoff, zero_tol)))
    return out
