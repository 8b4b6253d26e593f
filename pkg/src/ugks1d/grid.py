"""Velocity quadrature, spatial mesh, and material-coefficient sampling.

The discrete velocity average is ``<phi>_h = (1/2) sum_k w_k phi(v_k)`` so the
weights of any quadrature built here sum to 2 and the constant function has
average 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, InvalidDataError

__all__ = [
    "VelocityQuadrature",
    "SpatialMesh",
    "MaterialField",
    "build_gauss_legendre",
    "build_double_gauss",
    "average",
    "sample_material",
]


@dataclass(frozen=True)
class VelocityQuadrature:
    """Discrete ordinate nodes/weights on [-1, 1] with precomputed half-moments.

    Half-moments are the discrete values of <v 1_{v<0}>, <v 1_{v>0}>,
    <v^2 1_{v<0}>, <v^2 1_{v>0}> and <v^2> under this quadrature; the scheme
    uses these rather than the exact integrals to avoid accuracy loss for
    small scaling parameters.
    """

    nodes: np.ndarray
    weights: np.ndarray
    m_v_neg: float = field(init=False)
    m_v_pos: float = field(init=False)
    m_v2_neg: float = field(init=False)
    m_v2_pos: float = field(init=False)
    m_v2: float = field(init=False)

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise InvalidArgumentError("nodes and weights must be 1-D arrays of equal length")
        if np.any(nodes == 0.0):
            raise InvalidArgumentError("quadrature must not place a node at v = 0")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        neg = nodes < 0
        pos = ~neg
        half = 0.5 * weights
        object.__setattr__(self, "m_v_neg", float(np.sum(half[neg] * nodes[neg])))
        object.__setattr__(self, "m_v_pos", float(np.sum(half[pos] * nodes[pos])))
        object.__setattr__(self, "m_v2_neg", float(np.sum(half[neg] * nodes[neg] ** 2)))
        object.__setattr__(self, "m_v2_pos", float(np.sum(half[pos] * nodes[pos] ** 2)))
        object.__setattr__(self, "m_v2", float(np.sum(half * nodes**2)))

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def positive(self) -> np.ndarray:
        """Boolean mask of nodes with v > 0."""
        return self.nodes > 0


def _validate_order(n: int) -> None:
    if not isinstance(n, (int, np.integer)):
        raise InvalidArgumentError(f"quadrature order must be an integer, got {n!r}")
    if n % 2 != 0 or n < 2 or n > 512:
        raise InvalidArgumentError(f"quadrature order must be even and in [2, 512], got {n}")


def build_gauss_legendre(n: int) -> VelocityQuadrature:
    """Gauss-Legendre quadrature of even order ``n`` on [-1, 1].

    The even order guarantees no node at v = 0, where upwinding would be
    ambiguous.  Weights sum to 2.
    """
    _validate_order(n)
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return VelocityQuadrature(nodes, weights)


def build_double_gauss(n: int) -> VelocityQuadrature:
    """Half-range (double) Gauss quadrature: n/2 Gauss-Legendre nodes on each
    of [-1, 0] and [0, 1].

    Unlike the full-range rule, this one integrates polynomials exactly on
    each half-range separately, which matters for boundary half-moments of
    odd functions.
    """
    _validate_order(n)
    x, w = np.polynomial.legendre.leggauss(n // 2)
    vpos = 0.5 * (x + 1.0)
    wpos = 0.5 * w
    nodes = np.concatenate((-vpos[::-1], vpos))
    weights = np.concatenate((wpos[::-1], wpos))
    return VelocityQuadrature(nodes, weights)


def average(q: VelocityQuadrature, samples: np.ndarray) -> float:
    """Discrete velocity average ``(1/2) sum_k w_k samples_k``.

    For a 2-D input of shape (m, n_nodes) the average is taken along the last
    axis and an array of length m is returned.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[-1] != q.n:
        raise InvalidArgumentError(
            f"sample length {samples.shape[-1]} does not match node count {q.n}"
        )
    out = samples @ (0.5 * q.weights)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SpatialMesh:
    """Uniform cell-centered mesh on [x_min, x_max] with at least two cells."""

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self) -> None:
        if self.n_cells < 2:
            raise InvalidArgumentError(f"n_cells must be >= 2, got {self.n_cells}")
        if not self.x_max > self.x_min:
            raise InvalidArgumentError("x_max must exceed x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def interfaces(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_cells + 1) * self.dx


@dataclass(frozen=True)
class MaterialField:
    """Per-cell and per-interface samples of sigma, alpha and the source G.

    Interface values are arithmetic means of the adjacent cell values; the
    two boundary interfaces copy the adjacent cell value.
    """

    sigma_cell: np.ndarray
    alpha_cell: np.ndarray
    g_cell: np.ndarray
    sigma_iface: np.ndarray
    alpha_iface: np.ndarray
    g_iface: np.ndarray

    def __post_init__(self) -> None:
        n = self.sigma_cell.size
        for name in ("alpha_cell", "g_cell"):
            if getattr(self, name).size != n:
                raise InvalidArgumentError(f"{name} must have {n} entries")
        for name in ("sigma_iface", "alpha_iface", "g_iface"):
            if getattr(self, name).size != n + 1:
                raise InvalidArgumentError(f"{name} must have {n + 1} entries")
        for arr in (self.sigma_cell, self.alpha_cell, self.g_cell,
                    self.sigma_iface, self.alpha_iface, self.g_iface):
            arr.setflags(write=False)

    @property
    def n_cells(self) -> int:
        return self.sigma_cell.size


def _sample(fn: Callable[[float], float] | float, x: np.ndarray) -> np.ndarray:
    if np.isscalar(fn) or isinstance(fn, (int, float)):
        return np.full(x.shape, float(fn))
    try:
        out = np.asarray(fn(x), dtype=float)
        if out.shape == x.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(xi)) for xi in x])


def _to_interfaces(cell_values: np.ndarray) -> np.ndarray:
    iface = np.empty(cell_values.size + 1)
    iface[1:-1] = 0.5 * (cell_values[:-1] + cell_values[1:])
    iface[0] = cell_values[0]
    iface[-1] = cell_values[-1]
    return iface


def sample_material(
    sigma: Callable[[float], float] | float,
    alpha: Callable[[float], float] | float,
    source: Callable[[float], float] | float,
    mesh: SpatialMesh,
) -> MaterialField:
    """Sample sigma(x), alpha(x), G(x) at cell centers and build interface values.

    Cell values are midpoint samples; interface values are arithmetic means of
    the adjacent cells (boundary interfaces copy the adjacent cell).
    """
    x = mesh.centers
    sig = _sample(sigma, x)
    alp = _sample(alpha, x)
    g = _sample(source, x)
    if np.any(sig < 0):
        raise InvalidDataError("sigma(x) sampled negative")
    if np.any(alp < 0):
        raise InvalidDataError("alpha(x) sampled negative")
    if not (np.all(np.isfinite(sig)) and np.all(np.isfinite(alp)) and np.all(np.isfinite(g))):
        raise InvalidDataError("material sample is not finite")
    return MaterialField(
        sigma_cell=sig,
        alpha_cell=alp,
        g_cell=g,
        sigma_iface=_to_interfaces(sig),
        alpha_iface=_to_interfaces(alp),
        g_iface=_to_interfaces(g),
    )
