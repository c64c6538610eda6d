"""Tensor-product quadrature on the angular charts of the built-in families.

Azimuthal axes are periodic and use the composite trapezoid rule, which is
exact for trigonometric polynomials of degree below the point count.  Polar
axes use Gauss-Legendre nodes on ``(0, pi)`` so the area element vanishes
nowhere on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ParameterError
from .geometry import AnalyticFamily, ChartData, evaluate

RULES = ("trapezoid", "gauss")
MAX_POLAR_ORDER = 64
# chart points evaluated per block; bounds peak memory for n >= 3 grids
BLOCK_POINTS = 1 << 16


@dataclass(frozen=True)
class QuadratureSpec:
    points_per_dim: int = 256
    rule: str = "trapezoid"

    def __post_init__(self):
        if self.rule not in RULES:
            raise ParameterError(f"quadrature rule must be one of {RULES}, got {self.rule!r}")
        if int(self.points_per_dim) != self.points_per_dim or self.points_per_dim < 2:
            raise ParameterError("pointsPerDim must be an integer >= 2")

    @classmethod
    def for_dimension(cls, n: int, rule: str = "trapezoid") -> "QuadratureSpec":
        """Default grid sized so the full tensor product stays tractable."""
        points = {2: 256, 3: 32, 4: 16}.get(n, 10)
        return cls(points, rule)

    @property
    def polar_order(self) -> int:
        return min(self.points_per_dim, MAX_POLAR_ORDER)

    def to_dict(self) -> dict:
        return {"pointsPerDim": int(self.points_per_dim), "rule": self.rule}

    @classmethod
    def from_dict(cls, data: dict) -> "QuadratureSpec":
        unknown = set(data) - {"pointsPerDim", "rule"}
        if unknown:
            raise ParameterError(f"unknown quadrature keys {sorted(unknown)}")
        return cls(int(data.get("pointsPerDim", 256)), data.get("rule", "trapezoid"))


def _gauss(order: int, lo: float, hi: float):
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def axis_rules(family: AnalyticFamily, spec: QuadratureSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Nodes and weights for each chart axis."""
    periodic = set(family.periodic_axes)
    rules = []
    for ax in range(family.n):
        if ax in periodic:
            m = spec.points_per_dim
            if spec.rule == "trapezoid":
                rules.append((2.0 * math.pi * np.arange(m) / m, np.full(m, 2.0 * math.pi / m)))
            else:
                rules.append(_gauss(m, 0.0, 2.0 * math.pi))
        else:
            rules.append(_gauss(spec.polar_order, 0.0, math.pi))
    return rules


def iter_blocks(family: AnalyticFamily, spec: QuadratureSpec):
    """``(ChartData, weights)`` blocks covering the tensor grid in a fixed order.

    Weights already include the Riemannian area element.  Blocks are cached
    per (family, spec) since every integral over a family reuses the grid.
    """
    return _blocks(family, spec)


@lru_cache(maxsize=8)
def _blocks(family: AnalyticFamily, spec: QuadratureSpec) -> tuple:
    return tuple(_generate_blocks(family, spec))


def _generate_blocks(family: AnalyticFamily, spec: QuadratureSpec):
    rules = axis_rules(family, spec)
    sizes = [len(nodes) for nodes, _ in rules]
    total = math.prod(sizes)
    inner = total // sizes[0]
    step = max(1, BLOCK_POINTS // inner)
    rest_nodes = [nodes for nodes, _ in rules[1:]]
    rest_w = [w for _, w in rules[1:]]
    if rest_nodes:
        grid = np.meshgrid(*rest_nodes, indexing="ij")
        rest_u = np.stack([gg.ravel() for gg in grid], axis=1)
        wgrid = np.meshgrid(*rest_w, indexing="ij")
        rest_weight = np.prod(np.stack([gg.ravel() for gg in wgrid], axis=1), axis=1)
    else:
        rest_u = np.zeros((1, 0))
        rest_weight = np.ones(1)
    first_nodes, first_w = rules[0]
    for start in range(0, sizes[0], step):
        sl = slice(start, start + step)
        fn, fw = first_nodes[sl], first_w[sl]
        u = np.concatenate([np.repeat(fn, len(rest_u))[:, None], np.tile(rest_u, (len(fn), 1))],
                           axis=1)
        w = np.repeat(fw, len(rest_u)) * np.tile(rest_weight, len(fn))
        # Gauss nodes avoid the poles exactly; tiny metrics there are legitimate
        data = evaluate(family, u, check=False)
        yield data, w * data.sqrt_det


def integrate(family: AnalyticFamily, integrand, spec: QuadratureSpec):
    """Integrate ``integrand(ChartData) -> array (P, ...)`` over the surface."""
    total = None
    for data, w in iter_blocks(family, spec):
        vals = np.asarray(integrand(data), dtype=float)
        if vals.shape[:1] != w.shape:
            raise ParameterError("integrand must return one value (or array) per chart point")
        part = np.tensordot(w, vals, axes=(0, 0))
        total = part if total is None else total + part
    return total
