"""Profile comparison and convergence measurement."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ComparisonError, InvalidArgumentError

__all__ = ["restrict_profile", "profile_distance", "compare", "convergence_study", "ConvergenceResult"]

_NORMS = ("l1", "l2", "linf")


def restrict_profile(x_fine: np.ndarray, rho_fine: np.ndarray, n_coarse: int,
                     x_min: float, x_max: float) -> np.ndarray:
    """Piecewise-constant restriction of a fine cell-average profile onto a
    coarser uniform mesh (exact overlap-weighted averaging)."""
    n_fine = x_fine.size
    if n_coarse > n_fine:
        raise InvalidArgumentError("restriction target must be the coarser mesh")
    dx_f = (x_max - x_min) / n_fine
    dx_c = (x_max - x_min) / n_coarse
    if n_fine % n_coarse == 0:
        ratio = n_fine // n_coarse
        return rho_fine.reshape(n_coarse, ratio).mean(axis=1)
    edges_f = x_min + np.arange(n_fine + 1) * dx_f
    out = np.empty(n_coarse)
    for i in range(n_coarse):
        a = x_min + i * dx_c
        b = a + dx_c
        overlap = np.minimum(edges_f[1:], b) - np.maximum(edges_f[:-1], a)
        overlap = np.clip(overlap, 0.0, None)
        out[i] = float(overlap @ rho_fine) / dx_c
    return out


def profile_distance(diff: np.ndarray, dx: float, norm: str) -> float:
    norm = norm.lower()
    if norm == "l1":
        return float(np.sum(np.abs(diff)) * dx)
    if norm == "l2":
        return float(math.sqrt(np.sum(diff**2) * dx))
    if norm == "linf":
        return float(np.max(np.abs(diff)))
    raise InvalidArgumentError(f"unknown norm {norm!r}; expected one of {_NORMS}")


def compare(a, b, norm: str = "linf"):
    """Per-time distances between two run results.

    Profiles on different meshes are compared after piecewise-constant
    restriction onto the coarser one.  Returns a list of (distance,
    relative_distance) pairs, one per output time; the relative distance
    divides by the norm of the restricted second profile (zero-safe).
    """
    ta, tb = np.asarray(a.times), np.asarray(b.times)
    if ta.shape != tb.shape or not np.allclose(ta, tb, rtol=0.0, atol=1e-12):
        raise ComparisonError(f"output times differ: {a.times} vs {b.times}")
    na, nb = a.x.size, b.x.size
    n_c = min(na, nb)
    x_min = a.x[0] - 0.5 * (a.x[1] - a.x[0])
    x_max = a.x[-1] + 0.5 * (a.x[1] - a.x[0])
    dx_c = (x_max - x_min) / n_c
    out = []
    for pa, pb in zip(a.rho, b.rho):
        ra = restrict_profile(a.x, pa, n_c, x_min, x_max) if na > n_c else pa
        rb = restrict_profile(b.x, pb, n_c, x_min, x_max) if nb > n_c else pb
        dist = profile_distance(ra - rb, dx_c, norm)
        ref = profile_distance(rb, dx_c, norm)
        out.append((dist, dist / ref if ref > 0 else math.inf if dist > 0 else 0.0))
    return out


@dataclass(frozen=True)
class ConvergenceResult:
    cell_counts: tuple
    dx: tuple
    errors: tuple
    observed_order: float
    degenerate: bool


def convergence_study(spec, cell_counts, norm: str = "linf",
                      reference_cells: int | None = None, run_fn=None) -> ConvergenceResult:
    """Observed order of accuracy against a fine-mesh reference.

    Runs ``spec`` at each cell count plus a reference resolution (4x the
    largest by default), restricts the reference onto each mesh, and fits the
    least-squares slope of log error versus log dx at the final output time.
    Errors at rounding level are reported as degenerate (order NaN).
    """
    from .experiments import run as _run

    runner = run_fn or _run
    counts = [int(c) for c in cell_counts]
    if len(counts) < 3:
        raise InvalidArgumentError("need at least 3 cell counts")
    ratios = [counts[i + 1] / counts[i] for i in range(len(counts) - 1)]
    if any(abs(r - ratios[0]) > 1e-9 for r in ratios) or ratios[0] <= 1:
        raise InvalidArgumentError("cell counts must form an increasing geometric progression")
    if reference_cells is None:
        reference_cells = counts[-1] * 4
    ref = runner(spec, cells=reference_cells)
    x_min = spec.x_min
    x_max = spec.x_max
    errors = []
    dxs = []
    scale = None
    for c in counts:
        res = runner(spec, cells=c)
        ref_c = restrict_profile(ref.x, ref.rho[-1], c, x_min, x_max)
        dx = (x_max - x_min) / c
        errors.append(profile_distance(res.rho[-1] - ref_c, dx, norm))
        dxs.append(dx)
        if scale is None:
            scale = max(1.0, profile_distance(ref_c, dx, norm))
    if max(errors) <= 1e-12 * scale:
        return ConvergenceResult(tuple(counts), tuple(dxs), tuple(errors), math.nan, True)
    slope = np.polyfit(np.log(dxs), np.log(np.maximum(errors, 1e-300)), 1)[0]
    return ConvergenceResult(tuple(counts), tuple(dxs), tuple(errors), float(slope), False)
