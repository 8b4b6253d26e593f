"""Reference (oracle) solvers.

* explicit upwind discretization of the kinetic equation, first and second
  order in space;
* explicit and implicit 3-point diffusion schemes with interface diffusion
  coefficients kappa = 1/(3 sigma), boundary cells differencing the Dirichlet
  value against the first cell over a full cell width;
* the half-range boundary weight giving the Dirichlet value of the diffusion
  limit for anisotropic inflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from .errors import InvalidArgumentError, SolverFailureError
from .grid import MaterialField, SpatialMesh, VelocityQuadrature, average

__all__ = [
    "ChandrasekharWeight",
    "weight_samples",
    "chandrasekhar_density",
    "upwind_timestep",
    "upwind_step",
    "diffusion_timestep",
    "diffusion_step",
    "diffusion_run",
]


def weight_samples(variant: str, v):
    """Half-range weight W(v) for v in [0, 1].

    ``fitted``: 0.956 v + 1.565 v^2; ``polynomial``: (3/2) v^2 + v.
    """
    v = np.asarray(v, dtype=float)
    if variant == "fitted":
        return 0.956 * v + 1.565 * v**2
    if variant == "polynomial":
        return 1.5 * v**2 + v
    raise InvalidArgumentError(f"unknown weight variant {variant!r}")


@dataclass(frozen=True)
class ChandrasekharWeight:
    """W(v) sampled at the positive quadrature nodes."""

    variant: str
    samples: np.ndarray

    @classmethod
    def build(cls, variant: str, q: VelocityQuadrature) -> "ChandrasekharWeight":
        vals = weight_samples(variant, q.nodes[q.positive])
        return cls(variant=variant, samples=vals)


def chandrasekhar_density(f_left: np.ndarray, weight: ChandrasekharWeight,
                          q: VelocityQuadrature) -> float:
    """Boundary density ``2 <W f_L 1_{v>0}>_h`` of the diffusion limit."""
    f_left = np.asarray(f_left, dtype=float)
    pos = q.positive
    return float(np.sum(q.weights[pos] * weight.samples * f_left[pos]))


def upwind_timestep(eps: float, mat: MaterialField, mesh: SpatialMesh, cfl: float = 0.9) -> float:
    """Fully explicit stability bound: cfl * min(eps dx, eps^2/(sigma_max + eps^2 alpha_max))."""
    rate = float(np.max(mat.sigma_cell)) + eps**2 * float(np.max(mat.alpha_cell))
    transport = eps * mesh.dx
    if rate > 0:
        return cfl * min(transport, eps**2 / rate)
    return cfl * transport


def upwind_step(f: np.ndarray, eps: float, mat: MaterialField, mesh: SpatialMesh,
                q: VelocityQuadrature, f_left: np.ndarray, f_right: np.ndarray,
                dt: float, reconstruction: str = "first_order", theta_lim: float = 1.5) -> np.ndarray:
    """One forward-Euler upwind step of the kinetic equation.

    Inflow ghost values come from f_left (v > 0) and f_right (v < 0).  The
    ``mc_limited`` variant upgrades the interface values to a characteristic-
    traced linear reconstruction, which is what the UGKS flux degenerates to
    for vanishing sigma and alpha.
    """
    dx = mesh.dx
    bound = upwind_timestep(eps, mat, mesh, cfl=1.0)
    if dt > bound * (1.0 + 1e-12):
        raise InvalidArgumentError(f"dt={dt} exceeds the explicit stability bound {bound}")
    v = q.nodes
    pos = q.positive
    n = f.shape[0]

    if reconstruction == "mc_limited":
        from .ugks import _mc_slope_rows

        df = _mc_slope_rows(f, dx, theta_lim)
        shift = 0.5 * dx - v[None, :] * (0.5 * dt / eps)   # v>0 side
        shift_dn = -0.5 * dx - v[None, :] * (0.5 * dt / eps)
        up_vals = f + shift * df
        dn_vals = f + shift_dn * df
    elif reconstruction == "first_order":
        up_vals = f
        dn_vals = f
    else:
        raise InvalidArgumentError(f"unknown reconstruction {reconstruction!r}")

    flux = np.empty((n + 1, q.n))
    flux[1:, pos] = (v[pos] / eps) * up_vals[:, pos]
    flux[0, pos] = (v[pos] / eps) * f_left[pos]
    flux[:-1, ~pos] = (v[~pos] / eps) * dn_vals[:, ~pos]
    flux[-1, ~pos] = (v[~pos] / eps) * f_right[~pos]

    rho = average(q, f)
    relax = (mat.sigma_cell[:, None] / eps**2) * (rho[:, None] - f)
    f_new = f - (dt / dx) * (flux[1:] - flux[:-1]) + dt * (relax - mat.alpha_cell[:, None] * f + mat.g_cell[:, None])
    if not np.all(np.isfinite(f_new)):
        raise SolverFailureError("non-finite values in upwind step")
    return f_new


def diffusion_timestep(kappa_iface: np.ndarray, dx: float, cfl: float = 0.9) -> float:
    """Parabolic bound cfl * dx^2 / (2 max kappa) for the explicit scheme."""
    return cfl * dx**2 / (2.0 * float(np.max(kappa_iface)))


def _diffusion_flux(rho: np.ndarray, kappa_iface: np.ndarray, dx: float,
                    rho_l: float, rho_r: float) -> np.ndarray:
    flux = np.empty(rho.size + 1)
    flux[0] = kappa_iface[0] * (rho[0] - rho_l) / dx
    flux[1:-1] = kappa_iface[1:-1] * (rho[1:] - rho[:-1]) / dx
    flux[-1] = kappa_iface[-1] * (rho_r - rho[-1]) / dx
    return flux


def diffusion_step(rho: np.ndarray, kappa_iface: np.ndarray, alpha, source, dx: float,
                   dt: float, mode: str, dirichlet: tuple[float, float]) -> np.ndarray:
    """One step of the 3-point diffusion scheme.

    Interface coefficients multiply plain differences of neighbouring cell
    densities; the boundary flux differences the Dirichlet value against the
    first (last) cell over the full cell width, matching the small-eps limit
    of the kinetic scheme.  The absorption term is implicit in both modes.
    """
    rho = np.asarray(rho, dtype=float)
    n = rho.size
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (n,))
    source = np.broadcast_to(np.asarray(source, dtype=float), (n,))
    rho_l, rho_r = dirichlet
    if mode == "explicit":
        bound = diffusion_timestep(kappa_iface, dx, cfl=1.0)
        if dt > bound * (1.0 + 1e-12):
            raise InvalidArgumentError(f"dt={dt} exceeds the parabolic bound {bound}")
        flux = _diffusion_flux(rho, kappa_iface, dx, rho_l, rho_r)
        return (rho / dt + np.diff(flux) / dx + source) / (1.0 / dt + alpha)
    if mode == "implicit":
        c = kappa_iface / dx**2
        diag = 1.0 / dt + alpha + c[1:] + c[:-1]
        ab = np.zeros((3, n))
        ab[0, 1:] = -c[1:-1]
        ab[1, :] = diag
        ab[2, :-1] = -c[1:-1]
        rhs = rho / dt + source
        rhs[0] += c[0] * rho_l
        rhs[-1] += c[-1] * rho_r
        try:
            return solve_banded((1, 1), ab, rhs)
        except np.linalg.LinAlgError as exc:  # diagonally dominant: unreachable
            raise SolverFailureError(f"implicit diffusion solve failed: {exc}") from exc
    raise InvalidArgumentError(f"unknown diffusion mode {mode!r}")


def diffusion_run(rho0: np.ndarray, kappa_iface: np.ndarray, alpha, source, dx: float,
                  t_end: float, mode: str, dirichlet: tuple[float, float],
                  cfl: float = 0.9, dt: float | None = None,
                  fast: bool = True) -> np.ndarray:
    """Integrate the diffusion scheme to ``t_end`` (single output).

    For the explicit mode with uniform alpha the result is computed through
    the eigendecomposition of the (symmetric tridiagonal) update matrix; this
    reproduces the step-by-step iterates to rounding at any step count in
    O(n^2) work.  Set ``fast=False`` to force plain stepping.
    """
    rho = np.asarray(rho0, dtype=float).copy()
    n = rho.size
    alpha_arr = np.broadcast_to(np.asarray(alpha, dtype=float), (n,))
    source_arr = np.broadcast_to(np.asarray(source, dtype=float), (n,))
    if dt is None:
        dt = diffusion_timestep(kappa_iface, dx, cfl) if mode == "explicit" else cfl * dx
    n_full = int(np.floor(t_end / dt + 1e-12))
    remainder = t_end - n_full * dt

    alpha0 = float(alpha_arr[0])
    if mode == "explicit" and fast and np.all(alpha_arr == alpha0):
        rho = _explicit_modal(rho, kappa_iface, alpha0, source_arr, dx, dt, n_full, dirichlet)
        if remainder > 1e-14 * max(dt, 1.0):
            rho = diffusion_step(rho, kappa_iface, alpha_arr, source_arr, dx, remainder, mode, dirichlet)
        return rho

    for _ in range(n_full):
        rho = diffusion_step(rho, kappa_iface, alpha_arr, source_arr, dx, dt, mode, dirichlet)
    if remainder > 1e-14 * max(dt, 1.0):
        rho = diffusion_step(rho, kappa_iface, alpha_arr, source_arr, dx, remainder, mode, dirichlet)
    return rho


def _explicit_modal(rho0: np.ndarray, kappa_iface: np.ndarray, alpha0: float,
                    source: np.ndarray, dx: float, dt: float, nsteps: int,
                    dirichlet: tuple[float, float]) -> np.ndarray:
    """Exact n-step map of the explicit scheme via eigendecomposition.

    The explicit update with implicit uniform absorption is the affine map
    rho -> (rho + dt (L rho + b + G)) / (1 + dt alpha0) with L the symmetric
    tridiagonal diffusion operator and b the Dirichlet injection; iterating it
    n times reduces to powers of the eigenvalues of L.
    """
    if nsteps == 0:
        return rho0.copy()
    n = rho0.size
    rho_l, rho_r = dirichlet
    diag = -(kappa_iface[:-1] + kappa_iface[1:]) / dx**2
    off = kappa_iface[1:-1] / dx**2
    b = np.zeros(n)
    b[0] = kappa_iface[0] * rho_l / dx**2
    b[-1] = kappa_iface[-1] * rho_r / dx**2
    rhs = b + source
    lam, vecs = eigh_tridiagonal(diag, off)
    scale = 1.0 / (1.0 + dt * alpha0)
    # fixed point of the affine map: (I - M) rho* = scale*dt*rhs with
    # M = scale*(I + dt L); equivalently (alpha0 I - L) rho* = rhs.
    denom = alpha0 - lam
    coeffs_rhs = vecs.T @ rhs
    rho_star = vecs @ (coeffs_rhs / denom)
    mult = (scale * (1.0 + dt * lam)) ** nsteps
    c0 = vecs.T @ (rho0 - rho_star)
    return rho_star + vecs @ (mult * c0)


def dirichlet_series_profile(x: np.ndarray, t: float, kappa: float,
                             rho_l: float, rho_r: float, n_terms: int = 400) -> np.ndarray:
    """Analytic solution of rho_t = kappa rho_xx on [0,1] from rho(x,0)=0 with
    constant Dirichlet data, via the sine series; used as an oracle for the
    discrete references."""
    steady = rho_l + (rho_r - rho_l) * x
    out = steady.copy()
    for k in range(1, n_terms + 1):
        bk = 2.0 * (rho_l - rho_r * (-1.0) ** k) / (k * np.pi)
        term = bk * np.sin(k * np.pi * x) * np.exp(-kappa * (k * np.pi) ** 2 * t)
        out -= term
        if np.max(np.abs(term)) < 1e-17:
            break
    return out
