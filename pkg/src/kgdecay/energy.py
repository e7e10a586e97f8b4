"""Scalar energy functionals and the multiplier identities.

All volume integrals of a radial density f are 4 pi * int f(r) r^2 dr by
trapezoidal quadrature on the native grid.  Densities are expressed in the
w = r*u variables:

    |dt u|^2 r^2   = v^2
    |grad u|^2 r^2 = (w' - w/r)^2          (parity limit 0 at the origin)
    u^2 r^2        = w^2
    u^6 r^2        = w^6 / r^4

Ball-restricted integrals keep the direct gradient integrand; the
integrated-by-parts shortcut is valid only globally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateDenominator, NonpositiveTime,
                     SnapshotsTooSparse, TraceIncomplete)
from .model import CutoffPair, RadialGrid, RadialState, radial_derivative, u_from_w
from .solver import Trajectory

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class ConeWindow:
    """Time window (a, b) of a truncated light cone; valid with b > a > R."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.b > self.a > 0.0):
            raise ValueError(f"need b > a > 0, got a={self.a}, b={self.b}")


@dataclass
class EnergyReport:
    """All scalar diagnostics at one time."""

    t: float
    E: float
    E_R: float
    e_cone: float
    H: float
    chi2_u6: float
    norms_rho: dict

    def __post_init__(self):
        vals = [self.E, self.E_R, self.e_cone, self.H, self.chi2_u6,
                *self.norms_rho.values()]
        if not all(math.isfinite(x) and x >= -1e-14 for x in vals):
            raise ValueError("energy diagnostics must be finite and nonnegative")


def ball_integral(values: np.ndarray, grid: RadialGrid, rho: float) -> float:
    """Trapezoid of a nodal integrand from 0 to rho with a fractional final
    cell (linear interpolation of the integrand at rho)."""
    if rho <= 0.0:
        return 0.0
    rho = min(rho, grid.r_max)
    dr = grid.dr
    x = rho / dr
    i = min(int(x), grid.n - 1)
    total = float(np.trapezoid(values[: i + 1], dx=dr))
    frac = x - i
    if frac > 1e-12 and i + 1 < grid.n:
        f_rho = (1 - frac) * values[i] + frac * values[i + 1]
        total += 0.5 * (values[i] + f_rho) * (frac * dr)
    return total


def _grad_integrand(state: RadialState) -> np.ndarray:
    """(w' - w/r)^2 with the parity limit 0 at the origin."""
    dw = radial_derivative(state.w, state.grid.dr)
    u = u_from_w(state.w, state.grid)
    g = dw - u
    g[0] = 0.0
    return g * g


def _quintic_integrand(state: RadialState, cutoffs: CutoffPair) -> np.ndarray:
    out = np.zeros(state.grid.n)
    r = state.grid.r
    out[1:] = cutoffs.chi2[1:] * state.w[1:] ** 6 / r[1:] ** 4
    return out


def _energy_density(state: RadialState, cutoffs: CutoffPair) -> np.ndarray:
    """r^2-weighted density of the conserved energy."""
    return (0.5 * (state.v ** 2 + _grad_integrand(state)
                   + cutoffs.chi1 * state.w ** 2)
            + _quintic_integrand(state, cutoffs) / 6.0)


def global_energy(state: RadialState, cutoffs: CutoffPair) -> float:
    """Conserved total energy: quadratic part / 2 plus the sextic part / 6."""
    return float(FOUR_PI * np.trapezoid(_energy_density(state, cutoffs),
                                        dx=state.grid.dr))


def local_energy(state: RadialState, cutoffs: CutoffPair, rho: float) -> float:
    """Energy restricted to the ball of radius rho."""
    return FOUR_PI * ball_integral(_energy_density(state, cutoffs),
                                   state.grid, rho)


def chi2_u6_integral(state: RadialState, cutoffs: CutoffPair) -> float:
    """int chi2 |u|^6 dx = 4 pi int chi2 w^6 / r^4 dr."""
    return float(FOUR_PI * np.trapezoid(_quintic_integrand(state, cutoffs),
                                        dx=state.grid.dr))


def cone_energy(traj: Trajectory, t: float, cutoffs: CutoffPair) -> float:
    """Energy inside the light cone section |x| <= t at time t; the mass term
    carries the chi1 weight, consistently with the flux identity."""
    if t <= 0.0:
        return 0.0
    state = traj.state_at(t)
    return FOUR_PI * ball_integral(_energy_density(state, cutoffs),
                                   traj.grid, t)


def mantle_flux(traj: Trajectory, win: ConeWindow, cutoffs: CutoffPair,
                paper_variant: bool = False) -> float:
    """Outward energy flux through the cone mantle between times a and b:

        4 pi int_a^b [ (v + w' - w/r)^2/2 + chi1 w^2/2 + chi2 w^6/(6 r^4) ] dr

    along the diagonal r = t of the trace.  The radial flux factor is the
    divergence-consistent x/|x| form; paper_variant swaps in x/(t+1), kept
    for comparison only.
    """
    if not traj.trace_covers(win.a, win.b):
        raise TraceIncomplete(
            f"diagonal trace covers [{traj.trace_t[0] if len(traj.trace_t) else 0}, "
            f"{traj.trace_t[-1] if len(traj.trace_t) else 0}], needs [{win.a}, {win.b}]")
    tt = traj.trace_t
    sel = (tt >= win.a - 1e-12) & (tt <= win.b + 1e-12)
    t = tt[sel]
    w = traj.trace_w[sel]
    v = traj.trace_v[sel]
    dw = traj.trace_dwdr[sel]
    r = np.maximum(t, 1e-300)
    chi1 = np.interp(r, traj.grid.r, cutoffs.chi1)
    chi2 = np.interp(r, traj.grid.r, cutoffs.chi2)
    du = dw - w / r
    factor = r / (r + 1.0) if paper_variant else 1.0
    sq = 0.5 * (factor * v + du) ** 2
    dens = sq + 0.5 * chi1 * w ** 2 + chi2 * w ** 6 / r ** 4 / 6.0
    return float(FOUR_PI * np.trapezoid(dens, t))


def H_functional(traj: Trajectory, t: float, cutoffs: CutoffPair) -> float:
    """Dilation-multiplier functional over the cone section D(t):

        H(t) = int_{|x|<=t} t [ |Lu/t|^2/2
                                + (|grad u|^2 - |x.grad u/t|^2 + chi1 u^2)/2
                                + chi2 u^6/6 ] + u^2/t dx,

    with Lu = (-t dt + x.grad + 1) u; the u^2/t term is integrated alongside
    the others.  Nonnegative integrand on |x| <= t; nondecreasing in t under
    the validated cutoff conditions."""
    if t <= 0.0:
        raise NonpositiveTime(f"H(t) needs t > 0, got {t}")
    state = traj.state_at(t)
    grid = traj.grid
    r = grid.r
    w = state.w
    v = state.v
    dw = radial_derivative(w, grid.dr)
    # r^2-weighted integrands: (Lu)^2 r^2 = (r w' - t v)^2,
    # (|grad u|^2 - |r dr u / t|^2) r^2 = (w' - w/r)^2 (1 - r^2/t^2)
    lu2 = (r * dw - t * v) ** 2 / (2.0 * t)
    gterm = 0.5 * t * _grad_integrand(state) * np.maximum(0.0, 1.0 - (r / t) ** 2)
    mass = 0.5 * t * cutoffs.chi1 * w ** 2
    sext = t * _quintic_integrand(state, cutoffs) / 6.0
    usq = w ** 2 / t
    return FOUR_PI * ball_integral(lu2 + gterm + mass + sext + usq, grid, t)


def cone_bound_ratio(traj: Trajectory, win: ConeWindow, cutoffs: CutoffPair) -> float:
    """[int_{|x|<=a} chi2 u(a)^6 dx] / [(b/a) (e(b) + e(b)^(1/3))]; sweeping
    windows and taking the max estimates the uniform constant."""
    state_a = traj.state_at(win.a)
    num = FOUR_PI * ball_integral(_quintic_integrand(state_a, cutoffs),
                                  traj.grid, win.a)
    eb = cone_energy(traj, win.b, cutoffs)
    if eb <= 0.0:
        if num <= 1e-300:
            return 0.0
        raise DegenerateDenominator("cone energy vanishes while the sextic "
                                    "integral does not")
    return num / ((win.b / win.a) * (eb + eb ** (1.0 / 3.0)))


def pohozaev_balance(traj: Trajectory, win: ConeWindow, cutoffs: CutoffPair) -> dict:
    """The five terms of the integrated multiplier identity over the
    truncated cone, and their sum (the residual, converging to zero under
    refinement).

    Terms: I and II are the cone-section integrals of t*Q + u dt u at b and
    a, III the mantle term, IV the spacetime integral of |dt u|^2+|grad u|^2,
    V the cutoff term ((2/3) chi2 - (1/6) x.grad chi2) u^6 - (1/2)(x.grad
    chi1) u^2.  The chi1 coefficient carries the factor 1/2 required for the
    divergence identity to close; see the repository notes.
    """
    a, b = win.a, win.b
    if not traj.trace_covers(a, b):
        raise TraceIncomplete("diagonal trace does not cover the window")
    times = traj.times
    sel = (times >= a - 1e-9) & (times <= b + 1e-9)
    if int(np.sum(sel)) < 8:
        raise SnapshotsTooSparse(
            f"need at least 8 snapshots in [{a}, {b}] for the time quadrature")
    grid = traj.grid
    r = grid.r

    def section_integrand(state: RadialState, t: float) -> np.ndarray:
        # (t Q + u dt u) r^2 = -t * energy_density_r2 + r v w'
        dw = radial_derivative(state.w, grid.dr)
        return -t * _energy_density(state, cutoffs) + r * state.v * dw

    term1 = FOUR_PI * ball_integral(section_integrand(traj.state_at(b), b), grid, b)
    term2 = -FOUR_PI * ball_integral(section_integrand(traj.state_at(a), a), grid, a)

    # mantle: -(t Q + u dt u + x.P) reduces on r = t (radial fields) to
    # r chi1 w^2 + (r/3) chi2 w^6/r^4 - w v - w w' + w^2/r, r^2-weighted
    tt = traj.trace_t
    msel = (tt >= a - 1e-12) & (tt <= b + 1e-12)
    t_m = tt[msel]
    w_m = traj.trace_w[msel]
    v_m = traj.trace_v[msel]
    dw_m = traj.trace_dwdr[msel]
    r_m = np.maximum(t_m, 1e-300)
    chi1_m = np.interp(r_m, r, cutoffs.chi1)
    chi2_m = np.interp(r_m, r, cutoffs.chi2)
    dens_m = (r_m * chi1_m * w_m ** 2 + (r_m / 3.0) * chi2_m * w_m ** 6 / r_m ** 4
              - w_m * v_m - w_m * dw_m + w_m ** 2 / r_m)
    term3 = float(FOUR_PI * np.trapezoid(dens_m, t_m))

    # spacetime integrals over the cone interior
    sample_times = times[sel]
    iv_vals, v_vals = [], []
    for ts in sample_times:
        st = traj.state_at(float(ts))
        dens_iv = st.v ** 2 + _grad_integrand(st)
        iv_vals.append(FOUR_PI * ball_integral(dens_iv, grid, float(ts)))
        dens_v = np.zeros(grid.n)
        dens_v[1:] = ((2.0 / 3.0) * cutoffs.chi2[1:]
                      - (1.0 / 6.0) * r[1:] * cutoffs.dchi2[1:]) \
            * st.w[1:] ** 6 / r[1:] ** 4
        dens_v -= 0.5 * (r * cutoffs.dchi1) * st.w ** 2
        v_vals.append(FOUR_PI * ball_integral(dens_v, grid, float(ts)))
    term4 = float(np.trapezoid(iv_vals, sample_times))
    term5 = float(np.trapezoid(v_vals, sample_times))

    residual = term1 + term2 + term3 + term4 + term5
    return {"terms": (term1, term2, term3, term4, term5), "residual": residual}


def restricted_norms(state: RadialState, cutoffs: CutoffPair, radii) -> dict:
    """Map rho -> ball-restricted energy (squared norm)."""
    return {float(rho): local_energy(state, cutoffs, float(rho)) for rho in radii}


def energy_report(traj: Trajectory, t: float, cutoffs: CutoffPair,
                  observation_radius: float, norm_radii=()) -> EnergyReport:
    """Assemble all scalar diagnostics at one time."""
    state = traj.state_at(t)
    e_cone = cone_energy(traj, min(t, traj.grid.r_max), cutoffs) if t > 0 else 0.0
    h = H_functional(traj, min(t, traj.grid.r_max), cutoffs) if t > 0 else 0.0
    return EnergyReport(
        t=t,
        E=global_energy(state, cutoffs),
        E_R=local_energy(state, cutoffs, observation_radius),
        e_cone=e_cone,
        H=h,
        chi2_u6=chi2_u6_integral(state, cutoffs),
        norms_rho=restricted_norms(state, cutoffs, norm_radii),
    )
