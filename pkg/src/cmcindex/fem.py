"""P1 finite elements for the stability form on periodic charts of surfaces in S^3.

The chart square is split into ``m1 x m2`` cells, each cut along its
lower-left to upper-right diagonal, and glued periodically into a torus.
Element integrals use the three mid-edge points (exact for quadratics) with
the pullback metric evaluated at each point.  The discrete stability operator
is the pencil ``(K - V, M)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import ConvergenceError, InsufficientCountError, ParameterError, UnsupportedFamilyError
from .geometry import CLIFFORD, AnalyticFamily, evaluate

DEFAULT_ZERO_TOL = 0.05
DENSE_LIMIT = 600
RESIDUAL_TOL = 1e-8

# barycentric coordinates of the mid-edge quadrature points
_MID_EDGE = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


@dataclass(frozen=True)
class ParamMesh:
    m1: int
    m2: int
    periods: tuple = (2 * math.pi, 2 * math.pi)

    @property
    def num_nodes(self) -> int:
        return self.m1 * self.m2

    @property
    def num_triangles(self) -> int:
        return 2 * self.m1 * self.m2

    def node_id(self, i, j):
        """Periodic node index; ``(m1, j)`` is identified with ``(0, j)``."""
        return np.mod(i, self.m1) + self.m1 * np.mod(j, self.m2)

    def node_coords(self) -> np.ndarray:
        i, j = np.meshgrid(np.arange(self.m1), np.arange(self.m2), indexing="xy")
        h1, h2 = self.periods[0] / self.m1, self.periods[1] / self.m2
        return np.stack([i.ravel() * h1, j.ravel() * h2], axis=1)

    def triangles(self) -> tuple[np.ndarray, np.ndarray]:
        """Connectivity (T, 3) and unwrapped chart coordinates (T, 3, 2)."""
        i, j = np.meshgrid(np.arange(self.m1), np.arange(self.m2), indexing="xy")
        i, j = i.ravel(), j.ravel()
        corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
        lower = (0, 1, 2)
        upper = (0, 2, 3)
        h = np.array([self.periods[0] / self.m1, self.periods[1] / self.m2])
        conn, coords = [], []
        for tri in (lower, upper):
            conn.append(np.stack([self.node_id(*corners[c]) for c in tri], axis=1))
            coords.append(np.stack([np.stack(corners[c], axis=1) * h for c in tri], axis=1))
        # interleave so each cell's two triangles are adjacent
        conn = np.stack(conn, axis=1).reshape(-1, 3)
        coords = np.stack(coords, axis=1).reshape(-1, 3, 2)
        return conn, coords

    def edges(self) -> np.ndarray:
        conn, _ = self.triangles()
        e = np.concatenate([conn[:, [0, 1]], conn[:, [1, 2]], conn[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def euler_characteristic(self) -> int:
        return self.num_nodes - len(self.edges()) + self.num_triangles

    def valence(self) -> np.ndarray:
        e = self.edges()
        return np.bincount(e.ravel(), minlength=self.num_nodes)


def build_mesh(m1: int, m2: int, periods=(2 * math.pi, 2 * math.pi)) -> ParamMesh:
    if m1 < 4 or m2 < 4:
        raise ParameterError(f"mesh needs at least 4 nodes per period, got {m1}x{m2}")
    if len(periods) != 2 or min(periods) <= 0:
        raise ParameterError("periods must be two positive lengths")
    return ParamMesh(int(m1), int(m2), (float(periods[0]), float(periods[1])))


@dataclass
class StabilityPencil:
    K: sp.csr_matrix
    M: sp.csr_matrix
    V: sp.csr_matrix
    mesh: ParamMesh
    potential_max: float
    label: str = ""

    @property
    def operator(self) -> sp.csr_matrix:
        return (self.K - self.V).tocsr()

    @property
    def size(self) -> int:
        return self.K.shape[0]


Coefficients = Callable[[np.ndarray], tuple]


def assemble_coefficients(mesh: ParamMesh, coefficients: Coefficients, label: str = "") -> StabilityPencil:
    """Assemble K, M, V for ``coefficients(u) -> (metric (P,2,2), sqrt_det (P,), potential (P,))``."""
    conn, coords = mesh.triangles()
    ntri = len(conn)
    edge = np.stack([coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]], axis=2)
    det = np.linalg.det(edge)
    area = 0.5 * np.abs(det)
    inv = np.linalg.inv(edge)                       # rows are grad lambda_1, grad lambda_2
    grads = np.concatenate([-(inv[:, 0:1] + inv[:, 1:2]), inv], axis=1)   # (T, 3, 2)

    qpts = np.einsum("qc,tcd->tqd", _MID_EDGE, coords).reshape(-1, 2)
    metric, sqrt_det, potential = coefficients(qpts)
    metric = np.asarray(metric).reshape(ntri, 3, 2, 2)
    weight = (np.asarray(sqrt_det).reshape(ntri, 3) * (area / 3.0)[:, None])
    pot = np.asarray(potential).reshape(ntri, 3)
    ginv = np.linalg.inv(metric)

    k_loc = np.einsum("tq,tqab,tia,tjb->tij", weight, ginv, grads, grads)
    m_loc = np.einsum("tq,qi,qj->tij", weight, _MID_EDGE, _MID_EDGE)
    v_loc = np.einsum("tq,qi,qj->tij", weight * pot, _MID_EDGE, _MID_EDGE)

    rows = np.repeat(conn, 3, axis=1).ravel()
    cols = np.tile(conn, (1, 3)).ravel()
    n = mesh.num_nodes

    def build(local):
        mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
        mat.sum_duplicates()
        mat.sort_indices()
        # symmetrise away summation-order rounding
        return ((mat + mat.T) * 0.5).tocsr()

    return StabilityPencil(build(k_loc), build(m_loc), build(v_loc), mesh, float(np.max(pot)), label)


def assemble(family: AnalyticFamily, mesh: ParamMesh) -> StabilityPencil:
    """Discretise Q on a family with a global periodic chart (Clifford tori in S^3)."""
    if family.kind != CLIFFORD or family.n != 2:
        raise UnsupportedFamilyError(
            f"FEM needs a global periodic chart; {family.label} has none (use the closed engine)")

    def coefficients(u):
        d = evaluate(family, u)
        return d.metric, d.sqrt_det, d.norm_a2 + family.n

    return assemble_coefficients(mesh, coefficients, family.label)


def assemble_flat(mesh: ParamMesh, potential: float = 0.0) -> StabilityPencil:
    """Pencil of the flat metric ``du1^2 + du2^2`` with a constant potential."""
    def coefficients(u):
        npts = len(u)
        return np.broadcast_to(np.eye(2), (npts, 2, 2)), np.ones(npts), np.full(npts, potential)

    return assemble_coefficients(mesh, coefficients, f"flat(potential={potential})")


# -------------------------------------------------------------------------
# eigenvalues

@dataclass
class PencilSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray]
    count_computed: int
    max_residual: float


def _residuals(pencil: StabilityPencil, vals: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    op = pencil.operator
    res = op @ vecs - pencil.M @ vecs * vals
    mnorm = np.sqrt(np.einsum("ij,ij->j", vecs, pencil.M @ vecs))
    return np.linalg.norm(res, axis=0) / mnorm


def eigen_solve(pencil: StabilityPencil, count: int, keep_vectors: bool = True,
                dense_limit: int = DENSE_LIMIT) -> PencilSpectrum:
    """The ``count`` algebraically smallest eigenpairs of ``(K - V) x = mu M x``.

    Uses shift-invert Lanczos about ``-(max potential) - 1``, which lies below
    the whole spectrum because K is positive semidefinite.  Small problems
    go to a dense solver.
    """
    n = pencil.size
    if not 1 <= count <= n:
        raise ParameterError(f"count must lie in [1, {n}], got {count}")
    op = pencil.operator
    if n <= dense_limit or count >= n - 1:
        vals, vecs = scipy.linalg.eigh(op.toarray(), pencil.M.toarray(),
                                       subset_by_index=[0, count - 1])
    else:
        sigma = -pencil.potential_max - 1.0
        v0 = 1.0 + 0.25 * np.sin(1.618 * np.arange(n))
        try:
            vals, vecs = eigsh(op.tocsc(), k=count, M=pencil.M.tocsc(), sigma=sigma,
                               which="LM", v0=v0, tol=0.0, maxiter=20 * n)
        except ArpackNoConvergence as exc:
            best = None
            if exc.eigenvalues is not None and len(exc.eigenvalues):
                best = float(np.min(_residuals(pencil, exc.eigenvalues, exc.eigenvectors)))
            raise ConvergenceError("shift-invert Lanczos did not converge", best) from exc
        order = np.argsort(vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order]
    res = _residuals(pencil, vals, vecs)
    worst = float(res.max())
    if worst > RESIDUAL_TOL:
        raise ConvergenceError(f"eigenpair residual {worst:.3e} exceeds {RESIDUAL_TOL}", worst)
    return PencilSpectrum(vals, vecs if keep_vectors else None, count, worst)


def negative_count(spectrum: PencilSpectrum, zero_tol: float = DEFAULT_ZERO_TOL) -> tuple[int, int]:
    """``(strong, zero)``: eigenvalues below ``-zero_tol`` and within ``zero_tol`` of 0."""
    vals = spectrum.eigenvalues
    if vals[-1] < zero_tol:
        raise InsufficientCountError(
            f"largest of {len(vals)} computed eigenvalues is {vals[-1]:.4g} < zeroTol {zero_tol}")
    return int(np.sum(vals < -zero_tol)), int(np.sum(np.abs(vals) <= zero_tol))


def weak_negative_count(pencil: StabilityPencil, spectrum: PencilSpectrum,
                        zero_tol: float = DEFAULT_ZERO_TOL) -> int:
    """Negative directions of the discrete form on M-mean-zero vectors.

    The eigenvectors with eigenvalue below ``zero_tol`` are projected onto
    the M-orthogonal complement of the constants; the projected Gram pair is
    reduced past the null direction that the projection creates and its
    negative eigenvalues are counted.
    """
    if spectrum.eigenvectors is None:
        raise ParameterError("weak count needs eigenvectors")
    negative_count(spectrum, zero_tol)
    X = spectrum.eigenvectors[:, spectrum.eigenvalues < zero_tol]
    if X.shape[1] == 0:
        return 0
    ones = np.ones(pencil.size)
    m1 = pencil.M @ ones
    PX = X - np.outer(ones, (m1 @ X) / (m1 @ ones))
    a_r = PX.T @ (pencil.operator @ PX)
    b_r = PX.T @ (pencil.M @ PX)
    a_r, b_r = 0.5 * (a_r + a_r.T), 0.5 * (b_r + b_r.T)
    w, Q = np.linalg.eigh(b_r)
    keep = w > 1e-10 * max(w.max(), 1e-300)
    S = Q[:, keep] / np.sqrt(w[keep])
    mu = np.linalg.eigvalsh(S.T @ a_r @ S)
    return int(np.sum(mu < -zero_tol))


def solve_until_complete(pencil: StabilityPencil, zero_tol: float = DEFAULT_ZERO_TOL,
                         start: int = 16) -> PencilSpectrum:
    """Double the eigenvalue count until one computed eigenvalue exceeds ``zero_tol``."""
    count = min(start, pencil.size)
    while True:
        spec = eigen_solve(pencil, count)
        if spec.eigenvalues[-1] >= zero_tol or count == pencil.size:
            return spec
        count = min(2 * count, pencil.size)


# -------------------------------------------------------------------------
# plain-text export

def write_coordinate(matrix, path) -> None:
    """Write the lower triangle of a symmetric matrix, 1-based ``i j value`` lines.

    First line is ``rows cols nnz`` where nnz counts stored entries.
    """
    low = sp.tril(sp.csr_matrix(matrix), format="coo")
    order = np.lexsort((low.row, low.col))
    lines = [f"{matrix.shape[0]} {matrix.shape[1]} {low.nnz}"]
    for idx in order:
        lines.append(f"{low.row[idx] + 1} {low.col[idx] + 1} {low.data[idx]:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_coordinate(path) -> sp.csr_matrix:
    with open(path, encoding="utf-8") as fh:
        rows, cols, nnz = (int(x) for x in fh.readline().split())
        data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
    if len(data) != nnz:
        raise ParameterError(f"{path}: header announces {nnz} entries, found {len(data)}")
    i, j, val = data[:, 0].astype(int) - 1, data[:, 1].astype(int) - 1, data[:, 2]
    low = sp.coo_matrix((val, (i, j)), shape=(rows, cols))
    strict = sp.coo_matrix((val[i != j], (j[i != j], i[i != j])), shape=(rows, cols))
    return (low + strict).tocsr()
