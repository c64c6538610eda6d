"""Closed-form CMC hypersurfaces of the unit sphere and their pointwise geometry.

Two homogeneous families are supported:

* ``sphere``: the umbilical sphere ``S^n(r)`` sitting at height
  ``c = sqrt(1 - r^2)`` inside ``S^{n+1}``; ``r = 1`` is the totally
  geodesic equator.
* ``clifford``: the product ``S^k(a) x S^{n-k}(b)`` with ``a = r`` and
  ``b = sqrt(1 - r^2)``.

Every factor sphere ``S^m`` is parametrised by hyperspherical angles
``(t_0, ..., t_{m-1})``: the first ``m - 1`` are polar angles in ``(0, pi)``
and the last is an azimuth in ``[0, 2 pi)``.  All evaluation routines are
vectorised over a leading batch axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import DegenerateChartError, ParameterError

SPHERE = "sphere"
CLIFFORD = "clifford"
KINDS = (SPHERE, CLIFFORD)

# det(g) is compared after dividing out the factor radii, so the test is scale free
DEGENERATE_DET = 1e-12


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, int):
        return Fraction(value)
    raise ParameterError(f"cannot interpret {value!r} as an exact rational")


@dataclass(frozen=True)
class AnalyticFamily:
    """A round sphere or Clifford torus in ``S^{n+1}``.

    ``r`` is the sphere radius or the radius ``a`` of the first Clifford
    factor.  ``r2`` optionally stores ``r**2`` as an exact rational, which
    lets the closed spectral engine classify zero modes without rounding.
    """

    kind: str
    n: int
    r: float
    k: Optional[int] = None
    orientation: int = 1
    r2: Optional[Fraction] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown family kind {self.kind!r}")
        if int(self.n) != self.n or self.n < 2:
            raise ParameterError(f"n must be an integer >= 2, got {self.n}")
        if self.orientation not in (1, -1):
            raise ParameterError("orientation must be +1 or -1")
        if self.r2 is not None:
            if not 0 < self.r2 <= 1:
                raise ParameterError(f"r^2 must lie in (0, 1], got {self.r2}")
            if not math.isclose(self.r * self.r, float(self.r2), rel_tol=1e-12, abs_tol=1e-15):
                raise ParameterError("r and r2 disagree")
        if self.kind == SPHERE:
            if self.k is not None:
                raise ParameterError("k is only meaningful for Clifford tori")
            if not 0 < self.r <= 1:
                raise ParameterError(f"sphere radius must lie in (0, 1], got {self.r}")
        else:
            if self.k is None or not 1 <= self.k <= self.n - 1:
                raise ParameterError(f"k must satisfy 1 <= k <= n-1, got {self.k}")
            if not 0 < self.r < 1:
                raise ParameterError(f"Clifford radius must lie in (0, 1), got {self.r}")

    # constructors -------------------------------------------------------

    @classmethod
    def sphere(cls, n: int, r: float = 1.0, orientation: int = 1) -> "AnalyticFamily":
        return cls(SPHERE, n, float(r), None, orientation)

    @classmethod
    def clifford(cls, n: int, k: int, r: float, orientation: int = 1) -> "AnalyticFamily":
        return cls(CLIFFORD, n, float(r), k, orientation)

    @classmethod
    def from_r2(cls, kind: str, n: int, r2, k: Optional[int] = None,
                orientation: int = 1) -> "AnalyticFamily":
        """Build a family from an exact rational ``r^2`` such as ``"1/2"``."""
        q = _as_fraction(r2)
        return cls(kind, n, math.sqrt(q.numerator / q.denominator), k, orientation, q)

    @classmethod
    def minimal_clifford(cls, n: int, k: int, orientation: int = 1) -> "AnalyticFamily":
        return cls.from_r2(CLIFFORD, n, Fraction(k, n), k, orientation)

    # derived quantities -------------------------------------------------

    @property
    def ambient_dim(self) -> int:
        return self.n + 2

    @property
    def a(self) -> float:
        return self.r

    @property
    def b(self) -> float:
        """Second Clifford radius, or the height ``sqrt(1 - r^2)`` of a sphere."""
        if self.r2 is not None:
            return math.sqrt(float(1 - self.r2))
        return math.sqrt(max(0.0, 1.0 - self.r * self.r))

    @property
    def factors(self) -> list[tuple[int, float]]:
        """(dimension, radius) of each sphere factor of the chart."""
        if self.kind == SPHERE:
            return [(self.n, self.r)]
        return [(self.k, self.a), (self.n - self.k, self.b)]

    @property
    def periodic_axes(self) -> list[int]:
        """Chart axes that are azimuths (period ``2 pi``)."""
        axes, offset = [], 0
        for m, _ in self.factors:
            axes.append(offset + m - 1)
            offset += m
        return axes

    @property
    def label(self) -> str:
        sign = "+" if self.orientation > 0 else "-"
        if self.kind == SPHERE:
            return f"sphere(n={self.n}, r={self.r:.6g}, N{sign})"
        return f"clifford(n={self.n}, k={self.k}, r={self.r:.6g}, N{sign})"

    def principal_curvatures(self) -> np.ndarray:
        """Principal curvatures with respect to the stored normal."""
        s = self.orientation
        if self.kind == SPHERE:
            return np.full(self.n, -s * self.b / self.r)
        a, b = self.a, self.b
        return np.concatenate([np.full(self.k, s * b / a), np.full(self.n - self.k, -s * a / b)])

    def is_umbilical(self, tol: float = 1e-12) -> bool:
        return curvature_invariants(self).norm_phi2 <= tol

    def area(self) -> float:
        total = 1.0
        for m, radius in self.factors:
            total *= sphere_volume(m) * radius**m
        return total


def sphere_volume(m: int) -> float:
    """Volume of the unit sphere ``S^m``."""
    return 2.0 * math.pi ** ((m + 1) / 2) / math.gamma((m + 1) / 2)


@dataclass(frozen=True)
class CurvatureInvariants:
    mean_curvature: float
    norm_a2: float
    norm_phi2: float
    hypothesis_gap: float

    @property
    def abs_h(self) -> float:
        return abs(self.mean_curvature)


def curvature_invariants(family: AnalyticFamily) -> CurvatureInvariants:
    """H, |A|^2, |phi|^2 and the gap |A|^2 - 2 n H^2 (constant on built-ins)."""
    kappa = family.principal_curvatures()
    n = family.n
    h = float(kappa.sum()) / n
    a2 = float(np.dot(kappa, kappa))
    if family.kind == SPHERE:
        phi2 = 0.0
    else:
        phi2 = float(np.dot(kappa - h, kappa - h))
    return CurvatureInvariants(h, a2, phi2, a2 - 2 * n * h * h)


# -------------------------------------------------------------------------
# charts

def _sphere_chart(t: np.ndarray):
    """Unit ``S^m`` chart: points (P, m+1), derivatives (P, m+1, m), metric diagonal (P, m)."""
    npts, m = t.shape
    s, c = np.sin(t), np.cos(t)
    omega = np.empty((npts, m + 1))
    domega = np.zeros((npts, m + 1, m))
    for i in range(m + 1):
        # omega_i = prod_{j<i} s_j * (c_i if i < m else 1)
        tail = c[:, i] if i < m else 1.0
        prefix = np.prod(s[:, :i], axis=1) if i else np.ones(npts)
        omega[:, i] = prefix * tail
        for ell in range(min(i + 1, m)):
            if ell < i:
                others = np.prod(np.delete(s[:, :i], ell, axis=1), axis=1) if i > 1 else 1.0
                domega[:, i, ell] = others * c[:, ell] * tail
            else:
                domega[:, i, ell] = -prefix * s[:, i]
    gdiag = np.ones((npts, m))
    for ell in range(1, m):
        gdiag[:, ell] = gdiag[:, ell - 1] * s[:, ell - 1] ** 2
    return omega, domega, gdiag


def _sphere_metric_derivative(t: np.ndarray, gdiag: np.ndarray) -> np.ndarray:
    """dg[:, p, l] = d g_ll / d t_p for the diagonal unit-sphere metric."""
    npts, m = t.shape
    dg = np.zeros((npts, m, m))
    cot = np.cos(t) / np.sin(t)
    for ell in range(m):
        for p in range(ell):
            dg[:, p, ell] = 2.0 * cot[:, p] * gdiag[:, ell]
    return dg


def _batch(family: AnalyticFamily, u) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.ndim != 2 or arr.shape[1] != family.n:
        raise ParameterError(
            f"chart point has dimension {arr.shape[-1]}, family expects n={family.n}")
    return arr, single


@dataclass
class ChartData:
    """Batched pointwise geometry; leading axis indexes chart points."""

    u: np.ndarray
    position: np.ndarray       # (P, n+2)
    dposition: np.ndarray      # (P, n+2, n)  columns d x / d u_i
    normal: np.ndarray         # (P, n+2)
    dnormal: np.ndarray        # (P, n+2, n)
    metric: np.ndarray         # (P, n, n)
    metric_inv: np.ndarray     # (P, n, n)
    shape: np.ndarray          # (P, n, n)  A^i_j, acts on chart components
    sqrt_det: np.ndarray       # (P,)
    mean_curvature: np.ndarray
    norm_a2: np.ndarray

    @property
    def norm_phi2(self) -> np.ndarray:
        return self.norm_a2 - self.u.shape[1] * self.mean_curvature**2

    @property
    def second_form(self) -> np.ndarray:
        """h_ij = <A e_i, e_j> = (g A)_ij."""
        return self.metric @ self.shape


def _immersion(family: AnalyticFamily, u: np.ndarray):
    npts, n = u.shape
    x = np.zeros((npts, n + 2))
    dx = np.zeros((npts, n + 2, n))
    nu = np.zeros((npts, n + 2))
    dnu = np.zeros((npts, n + 2, n))
    s = family.orientation
    if family.kind == SPHERE:
        r, c = family.r, family.b
        omega, domega, _ = _sphere_chart(u)
        x[:, :n + 1] = r * omega
        x[:, n + 1] = c
        dx[:, :n + 1, :] = r * domega
        nu[:, :n + 1] = s * c * omega
        nu[:, n + 1] = -s * r
        dnu[:, :n + 1, :] = s * c * domega
        return x, dx, nu, dnu
    k, a, b = family.k, family.a, family.b
    w1, dw1, _ = _sphere_chart(u[:, :k])
    w2, dw2, _ = _sphere_chart(u[:, k:])
    x[:, :k + 1] = a * w1
    x[:, k + 1:] = b * w2
    dx[:, :k + 1, :k] = a * dw1
    dx[:, k + 1:, k:] = b * dw2
    nu[:, :k + 1] = -s * b * w1
    nu[:, k + 1:] = s * a * w2
    dnu[:, :k + 1, :k] = -s * b * dw1
    dnu[:, k + 1:, k:] = s * a * dw2
    return x, dx, nu, dnu


def _metric_scale(family: AnalyticFamily) -> float:
    return math.prod(radius ** (2 * m) for m, radius in family.factors)


def evaluate(family: AnalyticFamily, u, check: bool = True) -> ChartData:
    """Evaluate the full pointwise geometry at a batch of chart points.

    The shape operator is obtained from the Weingarten relation
    ``dN = -dx A``, i.e. ``A = -g^{-1} dx^T dN``.
    """
    u, _ = _batch(family, u)
    x, dx, nu, dnu = _immersion(family, u)
    g = np.einsum("pai,paj->pij", dx, dx)
    det = np.linalg.det(g)
    if check:
        bad = det / _metric_scale(family) < DEGENERATE_DET
        if np.any(bad):
            raise DegenerateChartError(
                f"{int(bad.sum())} chart point(s) with degenerate metric, e.g. u={u[bad][0]}")
    ginv = np.linalg.inv(g)
    shape = -ginv @ np.einsum("pai,paj->pij", dx, dnu)
    n = family.n
    trace = np.trace(shape, axis1=1, axis2=2)
    a2 = np.einsum("pij,pji->p", shape, shape)
    return ChartData(u, x, dx, nu, dnu, g, ginv, shape, np.sqrt(np.abs(det)), trace / n, a2)


def christoffel(family: AnalyticFamily, u) -> np.ndarray:
    """Closed-form Christoffel symbols ``gamma[p, k, i, j]`` of the pullback metric."""
    u, _ = _batch(family, u)
    npts, n = u.shape
    gdiag = np.empty((npts, n))
    dg = np.zeros((npts, n, n))
    offset = 0
    for m, radius in family.factors:
        t = u[:, offset:offset + m]
        _, _, gd = _sphere_chart(t)
        gdiag[:, offset:offset + m] = radius**2 * gd
        dg[:, offset:offset + m, offset:offset + m] = _sphere_metric_derivative(t, radius**2 * gd)
        offset += m
    eye = np.eye(n)
    # gamma^k_ij = 1/(2 g_kk) (d_i g_jk + d_j g_ik - d_k g_ij) for diagonal g
    term = (np.einsum("jk,pik->pkij", eye, dg)
            + np.einsum("ik,pjk->pkij", eye, dg)
            - np.einsum("ij,pki->pkij", eye, dg))
    return 0.5 * term / gdiag[:, :, None, None]


# -------------------------------------------------------------------------
# single-point API

@dataclass(frozen=True)
class GeometryFrame:
    position: np.ndarray
    normal: np.ndarray
    metric: np.ndarray
    shape: np.ndarray
    mean_curvature: float
    norm_a2: float
    norm_phi2: float


def position(family: AnalyticFamily, u) -> np.ndarray:
    """Point of the immersion for chart coordinates ``u`` (single or batched)."""
    arr, single = _batch(family, u)
    x = _immersion(family, arr)[0]
    return x[0] if single else x


def frame(family: AnalyticFamily, u) -> GeometryFrame:
    """Exact geometry at one chart point."""
    arr = np.asarray(u, dtype=float)
    if arr.ndim != 1:
        raise ParameterError("frame() takes a single chart point")
    d = evaluate(family, arr)
    return GeometryFrame(d.position[0], d.normal[0], d.metric[0], d.shape[0],
                         float(d.mean_curvature[0]), float(d.norm_a2[0]),
                         float(d.norm_phi2[0]))


def random_chart_points(family: AnalyticFamily, count: int, rng: np.random.Generator,
                        margin: float = 0.2) -> np.ndarray:
    """Uniform chart samples with polar angles kept ``margin`` away from the poles."""
    u = rng.uniform(0.0, 2.0 * math.pi, size=(count, family.n))
    periodic = set(family.periodic_axes)
    for ax in range(family.n):
        if ax not in periodic:
            u[:, ax] = rng.uniform(margin, math.pi - margin, size=count)
    return u
