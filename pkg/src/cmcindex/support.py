"""Support functions l_v = <x, v>, f_v = <N, v> and the test function psi_v.

Besides pointwise evaluation this module integrates the stability quadratic
form

    Q(f) = integral of |grad f|^2 - (|A|^2 + n) f^2

(the Dirichlet form of ``-integral f J f``) and checks the pointwise and
integral identities satisfied by l_v, f_v and psi_v on CMC hypersurfaces.
Hessian residuals are measured by central finite differences through the
chart, corrected to the intrinsic Hessian with closed-form Christoffel
symbols.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError
from .geometry import (DEGENERATE_DET, AnalyticFamily, ChartData, _metric_scale, christoffel,
                       evaluate, random_chart_points)
from .quadrature import QuadratureSpec, integrate


def as_vector(family: AnalyticFamily, v) -> np.ndarray:
    vec = np.asarray(v, dtype=float)
    if vec.shape != (family.ambient_dim,):
        raise ParameterError(
            f"ambient vector must have length n+2={family.ambient_dim}, got shape {vec.shape}")
    return vec


def basis_vector(family: AnalyticFamily, i: int) -> np.ndarray:
    e = np.zeros(family.ambient_dim)
    e[i] = 1.0
    return e


@dataclass(frozen=True)
class SupportSample:
    l: float
    f: float
    psi: float
    grad_l: np.ndarray       # chart (contravariant) components of v^T
    grad_f: np.ndarray       # chart components of -A v^T
    tangential: np.ndarray   # v^T as an ambient vector


def _support_fields(data: ChartData, v: np.ndarray):
    """Batched l, f, covariant derivatives dl, df and the chart components of v^T."""
    l = data.position @ v
    f = data.normal @ v
    dl = np.einsum("pai,a->pi", data.dposition, v)
    df = np.einsum("pai,a->pi", data.dnormal, v)
    t = np.einsum("pij,pj->pi", data.metric_inv, dl)
    return l, f, dl, df, t


def sample(family: AnalyticFamily, u, v) -> SupportSample:
    """Support functions and their gradients at one chart point."""
    v = as_vector(family, v)
    data = evaluate(family, u)
    if data.u.shape[0] != 1:
        raise ParameterError("sample() takes a single chart point")
    l, f, _, _, t = _support_fields(data, v)
    h = data.mean_curvature[0]
    grad_f = -data.shape[0] @ t[0]
    tangential = v - l[0] * data.position[0] - f[0] * data.normal[0]
    return SupportSample(float(l[0]), float(f[0]), float(l[0] - h * f[0]), t[0], grad_f,
                         tangential)


# -------------------------------------------------------------------------
# pointwise identity residuals

@dataclass(frozen=True)
class IdentityResidualReport:
    max_hess_l: float
    max_hess_f: float
    max_lap_l: float
    max_lap_f: float
    max_j_psi: float
    samples: int
    skipped: int

    def fields(self) -> dict:
        return {"maxHessL": self.max_hess_l, "maxHessF": self.max_hess_f,
                "maxLapL": self.max_lap_l, "maxLapF": self.max_lap_f,
                "maxJPsi": self.max_j_psi}

    @property
    def worst(self) -> float:
        return max(self.fields().values())


def _stencil(n: int, h: float) -> np.ndarray:
    """Offsets: 0, +-h e_i, then (+-h e_i +-h e_j) for i < j."""
    eye = np.eye(n) * h
    rows = [np.zeros(n)]
    for i in range(n):
        rows += [eye[i], -eye[i]]
    for i in range(n):
        for j in range(i + 1, n):
            rows += [eye[i] + eye[j], eye[i] - eye[j], -eye[i] + eye[j], -eye[i] - eye[j]]
    return np.array(rows)


def _fd_derivatives(vals: np.ndarray, n: int, h: float):
    """Central first derivatives and chart Hessians from stencil values (P, S, ...)."""
    d1 = np.empty((vals.shape[0], n) + vals.shape[2:])
    hess = np.empty((vals.shape[0], n, n) + vals.shape[2:])
    centre = vals[:, 0]
    for i in range(n):
        plus, minus = vals[:, 1 + 2 * i], vals[:, 2 + 2 * i]
        d1[:, i] = (plus - minus) / (2 * h)
        hess[:, i, i] = (plus - 2 * centre + minus) / h**2
    idx = 1 + 2 * n
    for i in range(n):
        for j in range(i + 1, n):
            pp, pm, mp, mm = (vals[:, idx + s] for s in range(4))
            hess[:, i, j] = hess[:, j, i] = (pp - pm - mp + mm) / (4 * h**2)
            idx += 4
    return d1, hess


def _orthonormal_max(resid: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """Largest entry of a bilinear-form residual expressed in an orthonormal frame."""
    chol = np.linalg.cholesky(metric)
    inv = np.linalg.inv(chol)
    on = inv @ resid @ np.swapaxes(inv, 1, 2)
    return np.abs(on).max(axis=(1, 2))


def identity_residuals(family: AnalyticFamily, v, sample_count: int = 64, h: float = 1e-4,
                       seed: int = 0) -> IdentityResidualReport:
    """Finite-difference residuals of the Hessian and Laplacian identities.

    Checked at random chart points: the Hessians of l_v and f_v, the
    Laplacians ``Delta l = -n l + n H f`` and ``Delta f = n H l - |A|^2 f``,
    and ``J psi = |phi|^2 l``.
    """
    if sample_count < 1:
        raise ParameterError("sampleCount must be >= 1")
    v = as_vector(family, v)
    n = family.n
    u = random_chart_points(family, sample_count, np.random.default_rng(seed))
    base = evaluate(family, u, check=False)
    ok = np.linalg.det(base.metric) / _metric_scale(family) >= DEGENERATE_DET
    skipped = int((~ok).sum())
    u = u[ok]
    if len(u) == 0:
        return IdentityResidualReport(0.0, 0.0, 0.0, 0.0, 0.0, 0, skipped)
    base = evaluate(family, u)

    offsets = _stencil(n, h)
    pts = (u[:, None, :] + offsets[None, :, :]).reshape(-1, n)
    stencil = evaluate(family, pts, check=False)
    npts, nst = len(u), len(offsets)
    lvals = (stencil.position @ v).reshape(npts, nst)
    fvals = (stencil.normal @ v).reshape(npts, nst)
    avals = stencil.shape.reshape(npts, nst, n, n)
    dl, hess_l_chart = _fd_derivatives(lvals, n, h)
    df, hess_f_chart = _fd_derivatives(fvals, n, h)
    dshape, _ = _fd_derivatives(avals, n, h)         # dshape[p, m, k, l] = d_m A^k_l

    gam = christoffel(family, u)                      # gam[p, k, i, j]
    hess_l = hess_l_chart - np.einsum("pkij,pk->pij", gam, dl)
    hess_f = hess_f_chart - np.einsum("pkij,pk->pij", gam, df)

    g, A = base.metric, base.shape
    sff = base.second_form
    L, F = lvals[:, 0], fvals[:, 0]
    H = base.mean_curvature
    a2 = base.norm_a2
    _, _, _, _, t = _support_fields(base, v)

    # (nabla_m A)^k_l = d_m A^k_l + gam^k_{m q} A^q_l - gam^q_{m l} A^k_q
    cov_a = (dshape + np.einsum("pkmq,pql->pmkl", gam, A)
             - np.einsum("pqml,pkq->pmkl", gam, A))
    # <(nabla_{e_i} A) v^T, e_j>
    nabla_term = np.einsum("pjk,pikl,pl->pij", g, cov_a, t)

    expect_l = -L[:, None, None] * g + F[:, None, None] * sff
    aga = np.swapaxes(A, 1, 2) @ g @ A
    expect_f = -nabla_term + L[:, None, None] * sff - F[:, None, None] * aga

    ginv = base.metric_inv
    lap_l = np.einsum("pij,pij->p", ginv, hess_l)
    lap_f = np.einsum("pij,pij->p", ginv, hess_f)
    lap_psi = lap_l - H * lap_f
    psi = L - H * F
    j_psi = lap_psi + (a2 + n) * psi

    return IdentityResidualReport(
        max_hess_l=float(_orthonormal_max(hess_l - expect_l, g).max()),
        max_hess_f=float(_orthonormal_max(hess_f - expect_f, g).max()),
        max_lap_l=float(np.abs(lap_l + n * L - n * H * F).max()),
        max_lap_f=float(np.abs(lap_f - n * H * L + a2 * F).max()),
        max_j_psi=float(np.abs(j_psi - base.norm_phi2 * L).max()),
        samples=npts,
        skipped=skipped,
    )


# -------------------------------------------------------------------------
# function selectors and the quadratic form

@dataclass(frozen=True)
class Selector:
    """Chooses the test function fed to :func:`q_form`.

    ``kind`` is one of ``psi``, ``l``, ``f`` or ``custom``; a custom selector
    wraps ``fn(ChartData) -> (values, covariant_gradient)``.
    """

    kind: str
    v: Optional[np.ndarray] = None
    fn: Optional[Callable] = None

    def evaluate(self, data: ChartData):
        if self.kind == "custom":
            vals, grad = self.fn(data)
            vals = np.asarray(vals, dtype=float)
            grad = np.asarray(grad, dtype=float)
            npts, n = data.u.shape
            if vals.shape != (npts,) or grad.shape != (npts, n):
                raise ParameterError("custom selector must return values (P,) and gradient (P, n)")
            if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(grad))):
                raise ParameterError("custom selector produced non-finite values")
            return vals, grad
        l, f, dl, df, _ = _support_fields(data, self.v)
        if self.kind == "l":
            return l, dl
        if self.kind == "f":
            return f, df
        h = data.mean_curvature
        return l - h * f, dl - h[:, None] * df


def psi(family: AnalyticFamily, v) -> Selector:
    return Selector("psi", as_vector(family, v))


def support_l(family: AnalyticFamily, v) -> Selector:
    return Selector("l", as_vector(family, v))


def support_f(family: AnalyticFamily, v) -> Selector:
    return Selector("f", as_vector(family, v))


def custom(fn: Callable) -> Selector:
    if not callable(fn):
        raise ParameterError("custom selector needs a callable")
    return Selector("custom", fn=fn)


def _dirichlet_density(data: ChartData, vals: np.ndarray, grad: np.ndarray) -> np.ndarray:
    grad_sq = np.einsum("pi,pij,pj->p", grad, data.metric_inv, grad)
    return grad_sq - (data.norm_a2 + data.u.shape[1]) * vals**2


def q_form(family: AnalyticFamily, selector: Selector, quad: QuadratureSpec) -> float:
    """Second variation ``Q(f)`` of the selected function."""
    if not isinstance(selector, Selector):
        raise ParameterError("selector must be built with psi(), support_l(), support_f() or custom()")
    return float(integrate(family, lambda d: _dirichlet_density(d, *selector.evaluate(d)), quad))


@dataclass(frozen=True)
class PsiQuadratic:
    q: float
    phi_l2: float       # -integral |phi|^2 l^2
    phi_hlf: float      # +integral |phi|^2 H l f

    @property
    def decomposition_residual(self) -> float:
        return abs(self.q - (self.phi_l2 + self.phi_hlf)) / (1.0 + abs(self.q))


def psi_quadratic(family: AnalyticFamily, v, quad: QuadratureSpec) -> PsiQuadratic:
    """Q(psi_v) together with the two terms of its |phi|^2 decomposition."""
    v = as_vector(family, v)
    sel = Selector("psi", v)

    def integrand(d):
        vals, grad = sel.evaluate(d)
        l, f, _, _, _ = _support_fields(d, v)
        phi2 = d.norm_phi2
        return np.stack([_dirichlet_density(d, vals, grad), -phi2 * l**2,
                         phi2 * d.mean_curvature * l * f], axis=1)

    q, t1, t2 = integrate(family, integrand, quad)
    return PsiQuadratic(float(q), float(t1), float(t2))


def mean_zero_check(family: AnalyticFamily, v, quad: QuadratureSpec) -> float:
    """|integral psi_v| / Area."""
    sel = psi(family, v)
    total = integrate(family, lambda d: sel.evaluate(d)[0], quad)
    area = integrate(family, lambda d: np.ones(d.u.shape[0]), quad)
    return abs(float(total)) / float(area)


def integral_identity_check(family: AnalyticFamily, v, quad: QuadratureSpec):
    """Return ``(lhs, rhs, residual)`` for ``nH int f l = -int |grad l|^2 + n int l^2``."""
    v = as_vector(family, v)
    n = family.n

    def integrand(d):
        l, f, dl, _, _ = _support_fields(d, v)
        grad_sq = np.einsum("pi,pij,pj->p", dl, d.metric_inv, dl)
        return np.stack([n * d.mean_curvature * f * l, -grad_sq + n * l**2], axis=1)

    lhs, rhs = (float(x) for x in integrate(family, integrand, quad))
    return lhs, rhs, abs(lhs - rhs) / (1.0 + abs(lhs))


@dataclass(frozen=True)
class BasisIntegrals:
    """Integrals over the canonical basis e_1..e_{n+2}, as (n+2)x(n+2) matrices.

    Any vector v gives e.g. ``integral l_v^2 = v @ ll @ v``.
    """

    ll: np.ndarray          # int l_i l_j
    ff: np.ndarray          # int f_i f_j
    lf: np.ndarray          # int l_i f_j
    grad_ll: np.ndarray     # int <grad l_i, grad l_j>
    psi_psi: np.ndarray     # int psi_i psi_j
    q_psi: np.ndarray       # Q bilinear form on psi_i, psi_j
    area: float
    phi2_integral: float


def basis_integrals(family: AnalyticFamily, quad: QuadratureSpec) -> BasisIntegrals:
    dim = family.ambient_dim
    n = family.n

    def integrand(d):
        x, nu = d.position, d.normal
        dx = d.dposition
        h = d.mean_curvature[:, None]
        ps = x - h * nu
        dps = dx - h[:, :, None] * d.dnormal
        grad_ll = np.einsum("pai,pij,pbj->pab", dx, d.metric_inv, dx)
        grad_pp = np.einsum("pai,pij,pbj->pab", dps, d.metric_inv, dps)
        pot = (d.norm_a2 + n)[:, None, None]
        blocks = [np.einsum("pa,pb->pab", x, x), np.einsum("pa,pb->pab", nu, nu),
                  np.einsum("pa,pb->pab", x, nu), grad_ll, np.einsum("pa,pb->pab", ps, ps),
                  grad_pp - pot * np.einsum("pa,pb->pab", ps, ps)]
        scal = np.zeros((len(x), dim, dim))
        scal[:, 0, 0] = 1.0
        scal[:, 0, 1] = d.norm_phi2
        return np.stack(blocks + [scal], axis=1)

    out = integrate(family, integrand, quad)
    return BasisIntegrals(*(out[i] for i in range(6)), float(out[6, 0, 0]), float(out[6, 0, 1]))
