"""UGKS time stepper for the scaled linear transport equation.

One step advances the cell-averaged distribution f[i][k] and its density
rho[i] through interface fluxes built from the exact characteristic integral
of the relaxation equation:

    phi_{i+1/2}(v) = A v f_up + C v rho_{i+1/2} + D v^2 (dL 1_{v>0} + dR 1_{v<0})
                     + E v G  [+ B v^2 (df_i 1_{v>0} + df_{i+1} 1_{v<0})]

The density update uses the velocity average of phi, in which the interface
density and source terms drop by quadrature symmetry; eliminating f^{n+1}
through that average is what makes the implicit relaxation solvable cell by
cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .coeffs import FluxCoefficients, blend_parameter, coefficient_arrays
from .errors import InvalidArgumentError, InvalidDataError, SolverFailureError
from .grid import MaterialField, SpatialMesh, VelocityQuadrature, average
from .reference import weight_samples

__all__ = [
    "KineticState",
    "BoundarySpec",
    "SchemeConfig",
    "interface_density",
    "slopes",
    "mc_slope",
    "micro_flux",
    "macro_flux",
    "boundary_fluxes_left",
    "boundary_fluxes_right",
    "cfl_timestep",
    "step",
    "moment_defect",
    "implicit_system",
]

BC_MODES = ("stabilized", "corrected", "blended")


@dataclass(frozen=True)
class KineticState:
    """Cell-averaged distribution f[i][k], its density rho[i], and the time."""

    f: np.ndarray
    rho: np.ndarray
    t: float

    def __post_init__(self) -> None:
        if self.f.ndim != 2 or self.rho.shape != (self.f.shape[0],):
            raise InvalidArgumentError("f must be (n_cells, n_nodes) with matching rho")
        self.f.setflags(write=False)
        self.rho.setflags(write=False)

    @classmethod
    def from_distribution(cls, f: np.ndarray, q: VelocityQuadrature, t: float = 0.0) -> "KineticState":
        f = np.array(f, dtype=float)
        return cls(f=f, rho=np.asarray(average(q, f)), t=t)


@dataclass(frozen=True)
class BoundarySpec:
    """Inflow data at quadrature nodes plus the boundary-condition mode.

    f_left is used for v > 0, f_right for v < 0.  ``mode`` selects between the
    stabilized, corrected, and blended boundary densities; ``weight_variant``
    picks the half-range weight used by the corrected/blended modes.
    """

    f_left: np.ndarray
    f_right: np.ndarray
    mode: str = "stabilized"
    weight_variant: str = "polynomial"

    def __post_init__(self) -> None:
        if self.mode not in BC_MODES:
            raise InvalidArgumentError(f"unknown boundary mode {self.mode!r}")
        if self.weight_variant not in ("polynomial", "fitted"):
            raise InvalidArgumentError(f"unknown weight variant {self.weight_variant!r}")
        self.f_left.setflags(write=False)
        self.f_right.setflags(write=False)

    @classmethod
    def from_functions(cls, f_left, f_right, q: VelocityQuadrature,
                       mode: str = "stabilized", weight_variant: str = "polynomial") -> "BoundarySpec":
        v = q.nodes
        fl = np.array([float(f_left(vk)) for vk in v]) if callable(f_left) else np.full(q.n, float(f_left))
        fr = np.array([float(f_right(vk)) for vk in v]) if callable(f_right) else np.full(q.n, float(f_right))
        pos = q.positive
        if np.any(fl[pos] < 0) or np.any(fr[~pos] < 0):
            raise InvalidDataError("inflow samples must be nonnegative on their incoming half-range")
        return cls(f_left=fl, f_right=fr, mode=mode, weight_variant=weight_variant)


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme selection: scaling parameter, CFL policy, reconstruction order,
    diffusion (slope) time level, and collision model."""

    eps: float
    cfl: float = 0.9
    reconstruction: str = "first_order"
    theta_lim: float = 1.5
    diffusion_mode: str = "explicit_slopes"
    collision: str = "isotropic"
    cfl_form: str = "max"

    def __post_init__(self) -> None:
        if not self.eps > 0:
            raise InvalidArgumentError("eps must be positive")
        if not 0 < self.cfl <= 1:
            raise InvalidArgumentError("cfl must lie in (0, 1]")
        if self.reconstruction not in ("first_order", "mc_limited"):
            raise InvalidArgumentError(f"unknown reconstruction {self.reconstruction!r}")
        if self.reconstruction == "mc_limited" and not 1.0 <= self.theta_lim <= 2.0:
            raise InvalidArgumentError("theta_lim must lie in [1, 2]")
        if self.diffusion_mode not in ("explicit_slopes", "implicit_slopes"):
            raise InvalidArgumentError(f"unknown diffusion mode {self.diffusion_mode!r}")
        if self.cfl_form not in ("max", "sum"):
            raise InvalidArgumentError(f"unknown cfl form {self.cfl_form!r}")


def interface_density(f_i: np.ndarray, f_ip1: np.ndarray, q: VelocityQuadrature) -> float:
    """Unique interface density ``<f_i 1_{v>0} + f_{i+1} 1_{v<0}>_h``."""
    f_i = np.asarray(f_i, dtype=float)
    f_ip1 = np.asarray(f_ip1, dtype=float)
    if f_i.shape != (q.n,) or f_ip1.shape != (q.n,):
        raise InvalidArgumentError("sample lengths must match the quadrature")
    return float(np.where(q.positive, f_i, f_ip1) @ (0.5 * q.weights))


def slopes(rho_iface: float, rho_left: float, rho_right: float, dx: float):
    """One-sided density slopes (dL, dR) about an interface value.

    In explicit mode the neighbours are the time-n cell densities; in
    implicit mode the caller supplies time-(n+1) values while the interface
    value stays at time n.
    """
    half = 0.5 * dx
    return (rho_iface - rho_left) / half, (rho_right - rho_iface) / half


def mc_slope(f_prev: float, f_mid: float, f_next: float, dx: float, theta_lim: float) -> float:
    """Three-argument minmod (MC-limited) slope; zero on sign disagreement."""
    if not dx > 0:
        raise InvalidArgumentError("dx must be positive")
    a = (f_next - f_prev) / (2.0 * dx)
    b = theta_lim * (f_mid - f_prev) / dx
    c = theta_lim * (f_next - f_mid) / dx
    if a > 0 and b > 0 and c > 0:
        return min(a, b, c)
    if a < 0 and b < 0 and c < 0:
        return max(a, b, c)
    return 0.0


def _mc_slope_rows(f: np.ndarray, dx: float, theta_lim: float) -> np.ndarray:
    """MC-limited slope per cell and node; zero in the first and last cells."""
    df = np.zeros_like(f)
    a = (f[2:] - f[:-2]) / (2.0 * dx)
    b = theta_lim * (f[1:-1] - f[:-2]) / dx
    c = theta_lim * (f[2:] - f[1:-1]) / dx
    pos = (a > 0) & (b > 0) & (c > 0)
    neg = (a < 0) & (b < 0) & (c < 0)
    df[1:-1] = np.where(pos, np.minimum(a, np.minimum(b, c)),
                        np.where(neg, np.maximum(a, np.maximum(b, c)), 0.0))
    return df


def micro_flux(coef: FluxCoefficients, v, f_up, f_down, rho_iface: float,
               delta_l: float, delta_r: float, g_iface, f_slopes=None):
    """Microscopic interface flux at velocity ``v`` (scalar or node array)."""
    v = np.asarray(v, dtype=float)
    up = v > 0
    out = (coef.a * v * np.where(up, f_up, f_down)
           + coef.c * v * rho_iface
           + coef.d * v**2 * np.where(up, delta_l, delta_r)
           + coef.e * v * g_iface)
    if f_slopes is not None:
        df_l, df_r = f_slopes
        out = out + coef.b * v**2 * np.where(up, df_l, df_r)
    return float(out) if out.ndim == 0 else out


def macro_flux(coef: FluxCoefficients, q: VelocityQuadrature, f_up, f_down,
               rho_i: float, rho_ip1: float, dx: float, f_slopes=None) -> float:
    """Velocity average of the microscopic flux; the interface density and
    source terms drop by quadrature symmetry and the slope terms collapse to
    ``D <v^2>_h (rho_{i+1} - rho_i)/dx``."""
    wv = 0.5 * q.weights * q.nodes
    sel = np.where(q.positive, f_up, f_down)
    out = coef.a * float(sel @ wv) + coef.d * q.m_v2 * (rho_ip1 - rho_i) / dx
    if f_slopes is not None:
        df_l, df_r = f_slopes
        wv2 = 0.5 * q.weights * q.nodes**2
        out += coef.b * float(np.where(q.positive, df_l, df_r) @ wv2)
    return out


def _weight_values(q: VelocityQuadrature, variant: str):
    """Raw and normalized half-range weight samples.

    Returns (w_pos, w_neg): values of W at |v| for the positive and negative
    node halves, normalized so that ``sum_{v>0} w_k W(v_k) = 1`` under this
    quadrature; the normalization makes the corrected boundary density map
    isotropic inflow to itself exactly.
    """
    vals = weight_samples(variant, np.abs(q.nodes))
    pos = q.positive
    norm = float(np.sum(q.weights[pos] * vals[pos]))
    vals = vals / norm
    return vals


def _boundary_density_left(q: VelocityQuadrature, bc: BoundarySpec, nu: float, dt: float):
    """Boundary density rho_{1/2} and the inflow term coefficient data.

    Returns (rho_half, inflow), where ``inflow`` multiplied by 1/eps is the
    inflow part of the macroscopic boundary flux.
    """
    pos = q.positive
    wv = 0.5 * q.weights * q.nodes
    fl = bc.f_left
    stab_inflow = float(fl[pos] @ wv[pos])       # <v f_L 1_{v>0}>_h
    rho_stab = -stab_inflow / q.m_v_neg
    if bc.mode == "stabilized":
        return rho_stab, stab_inflow
    wn = _weight_values(q, bc.weight_variant)
    rho_corr = float(np.sum(q.weights[pos] * wn[pos] * fl[pos]))  # = 2<W f_L 1_{v>0}>_h
    corr_inflow = -q.m_v_neg * rho_corr
    if bc.mode == "corrected":
        return rho_corr, corr_inflow
    theta = blend_parameter(nu, dt)
    return ((1.0 - theta) * rho_stab + theta * rho_corr,
            (1.0 - theta) * stab_inflow + theta * corr_inflow)


def _boundary_density_right(q: VelocityQuadrature, bc: BoundarySpec, nu: float, dt: float):
    neg = ~q.positive
    wv = 0.5 * q.weights * q.nodes
    fr = bc.f_right
    stab_inflow = float(fr[neg] @ wv[neg])       # <v f_R 1_{v<0}>_h  (negative)
    rho_stab = -stab_inflow / q.m_v_pos
    if bc.mode == "stabilized":
        return rho_stab, stab_inflow
    wn = _weight_values(q, bc.weight_variant)
    rho_corr = float(np.sum(q.weights[neg] * wn[neg] * fr[neg]))
    corr_inflow = -q.m_v_pos * rho_corr
    if bc.mode == "corrected":
        return rho_corr, corr_inflow
    theta = blend_parameter(nu, dt)
    return ((1.0 - theta) * rho_stab + theta * rho_corr,
            (1.0 - theta) * stab_inflow + theta * corr_inflow)


def boundary_fluxes_left(coef: FluxCoefficients, q: VelocityQuadrature, bc: BoundarySpec,
                         f1: np.ndarray, rho1: float, dx: float, g, eps: float, dt: float):
    """Left-boundary microscopic flux vector, macroscopic flux, and rho_{1/2}.

    For v > 0 the flux is the imposed inflow (v/eps) f_L; for v < 0 it is the
    interior-style flux built with the right-sided slope only.  ``g`` may be a
    scalar source or a per-node array.
    """
    v = q.nodes
    pos = q.positive
    wv = 0.5 * q.weights * v
    rho_half, inflow = _boundary_density_left(q, bc, coef.nu, dt)
    d_r = (rho1 - rho_half) / (0.5 * dx)
    g_arr = np.asarray(g, dtype=float)
    phi = np.where(pos, v / eps * bc.f_left,
                   coef.a * v * f1 + coef.c * v * rho_half + coef.d * v**2 * d_r
                   + coef.e * v * g_arr)
    if g_arr.ndim == 0:
        e_term = coef.e * q.m_v_neg * float(g_arr)
    else:
        e_term = coef.e * float(g_arr[~pos] @ wv[~pos])
    big_phi = (inflow / eps
               + coef.a * float(f1[~pos] @ wv[~pos])
               + coef.c * q.m_v_neg * rho_half
               + coef.d * q.m_v2_neg * d_r
               + e_term)
    return phi, big_phi, rho_half


def boundary_fluxes_right(coef: FluxCoefficients, q: VelocityQuadrature, bc: BoundarySpec,
                          fN: np.ndarray, rhoN: float, dx: float, g, eps: float, dt: float):
    """Right-boundary fluxes; mirror of the left construction under v -> -v."""
    v = q.nodes
    pos = q.positive
    wv = 0.5 * q.weights * v
    rho_half, inflow = _boundary_density_right(q, bc, coef.nu, dt)
    d_l = (rho_half - rhoN) / (0.5 * dx)
    g_arr = np.asarray(g, dtype=float)
    phi = np.where(~pos, v / eps * bc.f_right,
                   coef.a * v * fN + coef.c * v * rho_half + coef.d * v**2 * d_l
                   + coef.e * v * g_arr)
    if g_arr.ndim == 0:
        e_term = coef.e * q.m_v_pos * float(g_arr)
    else:
        e_term = coef.e * float(g_arr[pos] @ wv[pos])
    big_phi = (inflow / eps
               + coef.a * float(fN[pos] @ wv[pos])
               + coef.c * q.m_v_pos * rho_half
               + coef.d * q.m_v2_pos * d_l
               + e_term)
    return phi, big_phi, rho_half


def cfl_timestep(cfg: SchemeConfig, mat: MaterialField, mesh: SpatialMesh) -> float:
    """Time-step policy.

    Explicit slopes: dt = cfl * max(eps dx, (3/2) dx^2 sigma_min), optionally
    the sum form cfl * (eps dx + (3/2) dx^2 sigma_min).  Implicit slopes:
    dt = max(0.9 eps dx, cfl dx).
    """
    dx = mesh.dx
    if cfg.diffusion_mode == "implicit_slopes":
        return max(0.9 * cfg.eps * dx, cfg.cfl * dx)
    sigma_min = float(np.min(mat.sigma_cell))
    transport = cfg.eps * dx
    diffusive = 1.5 * dx * dx * sigma_min
    if cfg.cfl_form == "sum":
        return cfg.cfl * (transport + diffusive)
    return cfg.cfl * max(transport, diffusive)


def _coefficients_for(dt: float, eps: float, mat_sigma_if: np.ndarray, mat_alpha_if: np.ndarray):
    return coefficient_arrays(dt, eps, mat_sigma_if, mat_alpha_if)


def _step_arrays(f: np.ndarray, rho: np.ndarray, dt: float, eps: float,
                 q: VelocityQuadrature, dx: float,
                 sigma_c: np.ndarray, alpha_c: np.ndarray, source_c: Optional[np.ndarray],
                 sigma_if: np.ndarray, alpha_if: np.ndarray, g_if: Optional[np.ndarray],
                 bc: BoundarySpec, reconstruction: str, theta_lim: float,
                 implicit: bool, pernode_source: Optional[np.ndarray] = None,
                 coeff_arrays_tuple=None):
    """Advance (f, rho) by one step of size dt.  Shared by the isotropic and
    penalized steppers; ``pernode_source`` replaces the scalar source G with a
    per-cell, per-node field whose velocity mean is zero."""
    n, k = f.shape
    v = q.nodes
    pos = q.positive
    w_half = 0.5 * q.weights
    wv = w_half * v
    wv2 = w_half * v**2
    mpp, mnn = q.m_v2_pos, q.m_v2_neg

    if coeff_arrays_tuple is None:
        coeff_arrays_tuple = _coefficients_for(dt, eps, sigma_if, alpha_if)
    a_if, b_if, c_if, d_if, e_if, nu_if = coeff_arrays_tuple

    second_order = reconstruction == "mc_limited"
    df = _mc_slope_rows(f, dx, theta_lim) if second_order else None

    # Interior interfaces j = 1..n-1 (index 0..n-2 in the sliced arrays).
    rho_if = np.where(pos[None, :], f[:-1], f[1:]) @ w_half
    if second_order:
        f_up = f[:-1] + (0.5 * dx) * df[:-1]
        f_dn = f[1:] - (0.5 * dx) * df[1:]
    else:
        f_up, f_dn = f[:-1], f[1:]
    sel = np.where(pos[None, :], f_up, f_dn)

    ai = a_if[1:-1, None]
    ci = c_if[1:-1, None]
    ei = e_if[1:-1, None]
    phi_static = ai * v * sel + ci * v * rho_if[:, None]
    big_phi_static = a_if[1:-1] * (sel @ wv)
    if second_order:
        dfs = np.where(pos[None, :], df[:-1], df[1:])
        phi_static += b_if[1:-1, None] * v**2 * dfs
        big_phi_static = big_phi_static + b_if[1:-1] * (dfs @ wv2)
    if pernode_source is not None:
        gsel = np.where(pos[None, :], pernode_source[:-1], pernode_source[1:])
        phi_static += ei * v * gsel
        big_phi_static = big_phi_static + e_if[1:-1] * (gsel @ wv)
        g_left, g_right = pernode_source[0], pernode_source[-1]
    else:
        phi_static += ei * v * g_if[1:-1, None]
        g_left, g_right = float(g_if[0]), float(g_if[-1])

    # Boundary densities and the static (slope-free) parts of the boundary fluxes.
    rho_half_l, inflow_l = _boundary_density_left(q, bc, float(nu_if[0]), dt)
    rho_half_r, inflow_r = _boundary_density_right(q, bc, float(nu_if[-1]), dt)

    g_left_arr = np.asarray(g_left, dtype=float)
    g_right_arr = np.asarray(g_right, dtype=float)
    phi_l_static = np.where(pos, v / eps * bc.f_left,
                            a_if[0] * v * f[0] + c_if[0] * v * rho_half_l
                            + e_if[0] * v * g_left_arr)
    phi_r_static = np.where(~pos, v / eps * bc.f_right,
                            a_if[-1] * v * f[-1] + c_if[-1] * v * rho_half_r
                            + e_if[-1] * v * g_right_arr)
    if g_left_arr.ndim == 0:
        e_l = e_if[0] * q.m_v_neg * float(g_left_arr)
        e_r = e_if[-1] * q.m_v_pos * float(g_right_arr)
    else:
        e_l = e_if[0] * float(g_left_arr[~pos] @ wv[~pos])
        e_r = e_if[-1] * float(g_right_arr[pos] @ wv[pos])
    big_phi_l_static = (inflow_l / eps + a_if[0] * float(f[0][~pos] @ wv[~pos])
                        + c_if[0] * q.m_v_neg * rho_half_l + e_l)
    big_phi_r_static = (inflow_r / eps + a_if[-1] * float(f[-1][pos] @ wv[pos])
                        + c_if[-1] * q.m_v_pos * rho_half_r + e_r)

    source_rho = source_c if source_c is not None else 0.0
    inv_dx = 1.0 / dx
    two_over_dx = 2.0 / dx

    if not implicit:
        d_l = (rho_if - rho[:-1]) * two_over_dx
        d_r = (rho[1:] - rho_if) * two_over_dx
        d_r0 = (rho[0] - rho_half_l) * two_over_dx
        d_ln = (rho_half_r - rho[-1]) * two_over_dx
        big_phi = np.empty(n + 1)
        big_phi[0] = big_phi_l_static + d_if[0] * mnn * d_r0
        big_phi[1:-1] = big_phi_static + d_if[1:-1] * (mpp * d_l + mnn * d_r)
        big_phi[-1] = big_phi_r_static + d_if[-1] * mpp * d_ln
        rho_new = (rho / dt - np.diff(big_phi) * inv_dx + source_rho) / (1.0 / dt + alpha_c)
    else:
        # The D-terms couple the time-(n+1) neighbour densities: assemble and
        # solve the tridiagonal system by direct elimination.
        lower, diag, upper, expl = _implicit_bands(
            d_if, mpp, mnn, dx, dt, alpha_c, rho_if, rho_half_l, rho_half_r)
        big_phi_expl = np.empty(n + 1)
        big_phi_expl[0] = big_phi_l_static + expl[0]
        big_phi_expl[1:-1] = big_phi_static + expl[1:-1]
        big_phi_expl[-1] = big_phi_r_static + expl[-1]
        rhs = rho / dt - np.diff(big_phi_expl) * inv_dx + source_rho
        ab = np.zeros((3, n))
        ab[0, 1:] = upper[:-1]
        ab[1, :] = diag
        ab[2, :-1] = lower[1:]
        try:
            rho_new = solve_banded((1, 1), ab, rhs)
        except np.linalg.LinAlgError as exc:  # diagonally dominant: unreachable
            raise SolverFailureError(f"implicit density solve failed: {exc}") from exc
        d_l = (rho_if - rho_new[:-1]) * two_over_dx
        d_r = (rho_new[1:] - rho_if) * two_over_dx
        d_r0 = (rho_new[0] - rho_half_l) * two_over_dx
        d_ln = (rho_half_r - rho_new[-1]) * two_over_dx

    phi = np.empty((n + 1, k))
    phi[0] = phi_l_static + np.where(pos, 0.0, d_if[0] * v**2 * d_r0)
    phi[1:-1] = phi_static + d_if[1:-1, None] * v**2 * np.where(pos[None, :], d_l[:, None], d_r[:, None])
    phi[-1] = phi_r_static + np.where(pos, d_if[-1] * v**2 * d_ln, 0.0)

    relax = sigma_c[:, None] / eps**2
    denom = 1.0 / dt + relax + alpha_c[:, None]
    source_f = pernode_source if pernode_source is not None else (source_c[:, None] if source_c is not None else 0.0)
    f_new = (f / dt - (phi[1:] - phi[:-1]) * inv_dx + relax * rho_new[:, None] + source_f) / denom

    if not np.all(np.isfinite(f_new)) or not np.all(np.isfinite(rho_new)):
        raise SolverFailureError("non-finite values after step")
    return f_new, rho_new


def _implicit_bands(d_if: np.ndarray, mpp: float, mnn: float, dx: float, dt: float,
                    alpha_c: np.ndarray, rho_if: np.ndarray,
                    rho_half_l: float, rho_half_r: float):
    """Tridiagonal bands of the implicit density solve plus the explicit
    (time-n) leftover of each interface D-flux.

    With c_j = 2 D_j / dx^2 <= 0, row i reads
    ``lower[i] rho_{i-1} + diag[i] rho_i + upper[i] rho_{i+1} = rhs_i`` with
    diag[i] = 1/dt + alpha_i - c_{i+1} mpp - c_i mnn, upper[i] = c_{i+1} mnn,
    lower[i] = c_i mpp.  ``expl[j]`` is flux-level and completes the
    interface-j D-term when added to the static macroscopic flux.
    """
    n = alpha_c.size
    c = d_if * (2.0 / dx**2)
    diag = 1.0 / dt + alpha_c - c[1:] * mpp - c[:-1] * mnn
    lower = np.zeros(n)
    upper = np.zeros(n)
    upper[:-1] = c[1:-1] * mnn
    lower[1:] = c[1:-1] * mpp
    expl = np.empty(n + 1)
    expl[1:-1] = (2.0 * d_if[1:-1] / dx) * (mpp - mnn) * rho_if
    expl[0] = -(2.0 * d_if[0] / dx) * mnn * rho_half_l
    expl[-1] = (2.0 * d_if[-1] / dx) * mpp * rho_half_r
    return lower, diag, upper, expl


def step(state: KineticState, cfg: SchemeConfig, mat: MaterialField, mesh: SpatialMesh,
         q: VelocityQuadrature, bc: BoundarySpec, dt: Optional[float] = None,
         coeff_arrays_tuple=None) -> KineticState:
    """Advance the state by one UGKS step (isotropic collision operator)."""
    if cfg.collision != "isotropic":
        raise InvalidArgumentError("step() handles the isotropic operator; use penalized_step")
    if dt is None:
        dt = cfl_timestep(cfg, mat, mesh)
    f_new, rho_new = _step_arrays(
        state.f, state.rho, dt, cfg.eps, q, mesh.dx,
        mat.sigma_cell, mat.alpha_cell, mat.g_cell,
        mat.sigma_iface, mat.alpha_iface, mat.g_iface,
        bc, cfg.reconstruction, cfg.theta_lim,
        implicit=cfg.diffusion_mode == "implicit_slopes",
        coeff_arrays_tuple=coeff_arrays_tuple,
    )
    return KineticState(f=f_new, rho=rho_new, t=state.t + dt)


def moment_defect(state: KineticState, q: VelocityQuadrature) -> float:
    """max_i |rho_i - <f_i>_h| / (1 + |rho_i|) for the stored state."""
    rho_f = average(q, state.f)
    return float(np.max(np.abs(state.rho - rho_f) / (1.0 + np.abs(state.rho))))


def implicit_system(state: KineticState, cfg: SchemeConfig, mat: MaterialField,
                    mesh: SpatialMesh, q: VelocityQuadrature, bc: BoundarySpec,
                    dt: Optional[float] = None):
    """Assembled tridiagonal bands (lower, diag, upper) of the implicit
    density solve, for inspection.  The effective interface diffusion
    coefficient at interface j is ``-(upper[j-1] + lower[j]) * dx^2 / 2``
    evaluated across that interface."""
    if dt is None:
        dt = cfl_timestep(cfg, mat, mesh)
    a_if, b_if, c_if, d_if, e_if, nu_if = _coefficients_for(dt, cfg.eps, mat.sigma_iface, mat.alpha_iface)
    pos = q.positive
    w_half = 0.5 * q.weights
    rho_if = np.where(pos[None, :], state.f[:-1], state.f[1:]) @ w_half
    rho_half_l, _ = _boundary_density_left(q, bc, float(nu_if[0]), dt)
    rho_half_r, _ = _boundary_density_right(q, bc, float(nu_if[-1]), dt)
    lower, diag, upper, _ = _implicit_bands(
        d_if, q.m_v2_pos, q.m_v2_neg, mesh.dx, dt, mat.alpha_cell, rho_if, rho_half_l, rho_half_r)
    return lower, diag, upper
