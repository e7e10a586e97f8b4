"""Translation representation of radial free waves, incoming/outgoing
subspaces and projections, the localized linear group, and the compressed
semigroup built from them.

A free radial solution has the form w(t, r) = F(r - t) - F(-r - t).  The map
to the representer k(s) = sqrt(8 pi) F'(s) is a unitary onto L^2(R) for the
energy norm

    ||phi||_H^2 = 4 pi * int (v^2 + (dr w)^2) dr            (global form),

the free group acts on k as the right shift, the outgoing subspace D+ is
{supp k in [R, inf)}, the incoming one D- is {supp k in (-inf, -R]}, and the
projections P+/P- onto their orthogonal complements are support restrictions.

Discrete conventions are chosen so that to_profile and from_profile are exact
inverses: k is built from the centered derivative of w (odd extension at the
origin), and w is rebuilt by the midpoint cumulation along the two index
parity chains, which inverts the centered difference exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NotIncoming, ProfileOutOfRange, TimeTooSmall
from .model import CutoffPair, RadialGrid, RadialState, radial_derivative
from .solver import SchemeConfig, _Kernel, cfl_limit, free_wave_exact

SQRT_8PI = math.sqrt(8.0 * math.pi)


@dataclass
class TranslationProfile:
    """Representer k sampled on the symmetric s-grid [-s_max, s_max]."""

    s_min: float
    s_max: float
    ds: float
    k: np.ndarray

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=float)
        m = round((self.s_max - self.s_min) / self.ds)
        if len(self.k) != m + 1:
            raise ValueError("representer length inconsistent with the s-grid")
        if abs(self.s_min + self.s_max) > 1e-9 * max(1.0, self.s_max):
            raise ValueError("s-grid must be symmetric about 0")

    @cached_property
    def s(self) -> np.ndarray:
        return self.s_min + self.ds * np.arange(len(self.k))

    def norm(self) -> float:
        return float(np.sqrt(np.trapezoid(self.k ** 2, dx=self.ds)))

    def copy(self) -> "TranslationProfile":
        return TranslationProfile(self.s_min, self.s_max, self.ds, self.k.copy())


@dataclass(frozen=True)
class SubspaceTag:
    kind: str  # D_plus | D_minus | K_interaction
    R: float

    def __post_init__(self):
        if self.kind not in ("D_plus", "D_minus", "K_interaction"):
            raise ValueError(f"unknown subspace kind {self.kind!r}")
        if self.R <= 0:
            raise ValueError("R must be positive")


@dataclass
class OperatorProbe:
    seed: int
    ensemble_size: int
    ratios: np.ndarray
    max_ratio: float


# ---------------------------------------------------------------------------
# representation maps
# ---------------------------------------------------------------------------

def _k_from_wv(w: np.ndarray, v: np.ndarray, dr: float) -> np.ndarray:
    """Representer samples from (w, v); axis 0 is the radial index."""
    n = w.shape[0]
    dw = np.empty_like(w)
    dw[1:-1] = (w[2:] - w[:-2]) / (2.0 * dr)
    dw[0] = w[1] / dr
    dw[-1] = (3.0 * w[-1] - 4.0 * w[-2] + w[-3]) / (2.0 * dr)
    shape = (2 * n - 1,) + w.shape[1:]
    k = np.empty(shape, dtype=float)
    k[n - 1] = 0.5 * SQRT_8PI * dw[0]
    k[n:] = 0.5 * SQRT_8PI * (dw[1:] - v[1:])
    k[n - 2:: -1] = 0.5 * SQRT_8PI * (dw[1:] + v[1:])
    return k


def _wv_from_k(k: np.ndarray, dr: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact inverse of :func:`_k_from_wv` (interior nodes)."""
    n = (k.shape[0] + 1) // 2
    K = k / SQRT_8PI
    kp = K[n:]            # F'(i dr), i = 1..n-1
    km = K[n - 2:: -1]    # F'(-i dr)
    W = np.empty((n,) + k.shape[1:], dtype=float)
    W[0] = 2.0 * K[n - 1]
    W[1:] = kp + km
    v = np.zeros_like(W)
    v[1:] = km - kp
    w = np.empty_like(W)
    w[0] = 0.0
    w[1] = dr * W[0]
    # midpoint cumulation along each index parity chain inverts the centered
    # difference w'(i) = (w[i+1] - w[i-1]) / (2 dr)
    even = 2.0 * dr * np.cumsum(W[1:-1:2], axis=0)
    w[2::2] = even
    if n > 3:
        odd = w[1] + 2.0 * dr * np.cumsum(W[2:-1:2], axis=0)
        w[3::2] = odd
    return w, v


def to_profile(state: RadialState) -> TranslationProfile:
    """Representer of radial Cauchy data; isometric for the energy norm."""
    k = _k_from_wv(state.w, state.v, state.grid.dr)
    return TranslationProfile(-state.grid.r_max, state.grid.r_max,
                              state.grid.dr, k)


def from_profile(profile: TranslationProfile, grid: RadialGrid | None = None,
                 t: float = 0.0) -> RadialState:
    """Reconstruct the represented Cauchy data.

    Only F' is physical, so the reconstruction is anchored harmlessly; a
    nonzero mean of k shows up as a constant far field of w (a 1/r tail of u),
    which the energy norm does not see.
    """
    n = (len(profile.k) + 1) // 2
    if grid is None:
        grid = RadialGrid(r_max=profile.s_max, n=n)
    else:
        if grid.n != n or abs(grid.dr - profile.ds) > 1e-12 * profile.ds:
            raise ValueError("profile grid does not match the target grid")
    w, v = _wv_from_k(profile.k, profile.ds)
    return RadialState(t, w, v, grid)


def energy_norm(state: RadialState) -> float:
    """||phi||_H with the centered-derivative quadrature matching to_profile."""
    dw = radial_derivative(state.w, state.grid.dr)
    val = np.trapezoid(dw * dw + state.v * state.v, dx=state.grid.dr)
    return float(np.sqrt(4.0 * math.pi * val))


def energy_inner(a: RadialState, b: RadialState) -> float:
    """Energy inner product (gradient x gradient + velocity x velocity)."""
    dr = a.grid.dr
    dwa = radial_derivative(a.w, dr)
    dwb = radial_derivative(b.w, dr)
    return float(4.0 * math.pi
                 * np.trapezoid(dwa * dwb + a.v * b.v, dx=dr))


# ---------------------------------------------------------------------------
# shifts and projections
# ---------------------------------------------------------------------------

def shift(profile: TranslationProfile, t: float, strict: bool = True,
          leak_tol: float = 1e-8) -> TranslationProfile:
    """Right shift by t (the free group on representers); exact when t is a
    grid multiple, linear interpolation otherwise.

    Raises ProfileOutOfRange when a non-negligible part of the representer
    would leave the window (strict mode).
    """
    k = profile.k
    ds = profile.ds
    if t == 0.0:
        return profile.copy()
    if strict:
        s = profile.s
        if t > 0:
            mask = s > profile.s_max - t
        else:
            mask = s < profile.s_min - t
        if np.any(mask):
            lost = math.sqrt(max(0.0, float(np.trapezoid(
                np.where(mask, k, 0.0) ** 2, dx=ds))))
            total = profile.norm()
            if lost > leak_tol * (total + 1e-300):
                raise ProfileOutOfRange(
                    f"shift by {t} pushes {lost:.3e} of the representer "
                    f"(norm {total:.3e}) outside the window")
    m_real = t / ds
    m = round(m_real)
    out = np.zeros_like(k)
    if abs(m_real - m) <= 1e-9 * max(1.0, abs(m_real)):
        if m >= 0:
            if m < len(k):
                out[m:] = k[: len(k) - m]
        else:
            if -m < len(k):
                out[:m] = k[-m:]
    else:
        out = np.interp(profile.s - t, profile.s, k, left=0.0, right=0.0)
    return TranslationProfile(profile.s_min, profile.s_max, ds, out)


def project(profile: TranslationProfile, which: str, R: float) -> TranslationProfile:
    """P+ zeroes the representer on s >= R, P- on s <= -R; exact indicator
    multiplication, hence idempotent."""
    out = profile.copy()
    if which == "P_plus":
        out.k[profile.s >= R - 1e-12] = 0.0
    elif which == "P_minus":
        out.k[profile.s <= -R + 1e-12] = 0.0
    else:
        raise ValueError(f"unknown projection {which!r}")
    return out


def subspace_leak(profile: TranslationProfile, tag: SubspaceTag) -> float:
    """Relative L2 mass of the representer outside the tagged support set."""
    s = profile.s
    if tag.kind == "D_plus":
        mask = s < tag.R - 1e-12
    elif tag.kind == "D_minus":
        mask = s > -tag.R + 1e-12
    else:
        mask = np.abs(s) > tag.R + 1e-12
    lost = math.sqrt(max(0.0, float(np.trapezoid(
        np.where(mask, profile.k, 0.0) ** 2, dx=profile.ds))))
    return lost / (profile.norm() + 1e-300)


# ---------------------------------------------------------------------------
# groups and compressed semigroup
# ---------------------------------------------------------------------------

def _pick_steps(t: float, dt_target: float) -> tuple[int, float]:
    ratio = t / dt_target
    n = round(ratio)
    if n >= 1 and abs(ratio - n) <= 1e-9 * max(1.0, ratio):
        return n, dt_target
    n = max(1, int(math.ceil(ratio - 1e-12)))
    return n, t / n


def kg_group_apply(state: RadialState, t: float, cutoffs: CutoffPair,
                   cfg: SchemeConfig, dt_override: float | None = None) -> RadialState:
    """The localized linear group U_KG(t): evolve dtt u - lap u + chi1 u = 0.

    chi2 is dropped regardless of the supplied pair (linear setting); equal
    dt across calls makes compositions bit-reproducible.
    """
    if t < 0:
        raise ValueError("t must be nonnegative for the semigroup direction")
    if t == 0.0:
        return state.copy()
    lin = cutoffs.linearized()
    dt_target = dt_override if dt_override is not None else cfl_limit(state.grid, cfg.cfl)
    n_steps, dt = _pick_steps(t, dt_target)
    kern = _Kernel(state.grid, lin)
    w = state.w.copy()
    v = state.v.copy()
    tt = state.t
    for _ in range(n_steps):
        w, v = kern.step(w, v, tt, dt, cfg)
        tt += dt
    return RadialState(state.t + t, w, v, state.grid)


def z_apply(state: RadialState, t: float, cutoffs: CutoffPair,
            cfg: SchemeConfig) -> RadialState:
    """The compressed semigroup P+ U_KG(t) P- applied through the representation."""
    R = cutoffs.R
    km = project(to_profile(state), "P_minus", R)
    inner = from_profile(km, state.grid, t=state.t)
    evolved = kg_group_apply(inner, t, cutoffs, cfg)
    kp = project(to_profile(evolved), "P_plus", R)
    return from_profile(kp, state.grid, t=state.t + t)


def m_apply(state: RadialState, cutoffs: CutoffPair, cfg: SchemeConfig) -> RadialState:
    """M = U_KG(2R) - U(2R); supported in the ball of radius 3R."""
    two_r = 2.0 * cutoffs.R
    kg = kg_group_apply(state, two_r, cutoffs, cfg)
    free = free_wave_exact(state, two_r)
    return RadialState(kg.t, kg.w - free.w, kg.v - free.v, state.grid)


def restricted_norm(state: RadialState, rho: float, cutoffs: CutoffPair) -> float:
    """||phi||_rho: square root of the ball-restricted energy with chi2 dropped."""
    from .energy import local_energy
    return math.sqrt(max(0.0, local_energy(state, cutoffs.linearized(), rho)))


def verify_factorization(state: RadialState, t: float, cutoffs: CutoffPair,
                         cfg: SchemeConfig) -> float:
    """Residual of Z(t) = P+ M U_KG(t - 4R) M P- at time t >= 4R, relative to
    the probe norm; both sides are compared in the representation."""
    R = cutoffs.R
    if t < 4.0 * R - 1e-12:
        raise TimeTooSmall(f"factorization needs t >= 4R = {4 * R}, got {t}")
    phi_norm = energy_norm(state)
    if phi_norm == 0.0:
        return 0.0
    # direct path
    k_direct = project(to_profile(
        kg_group_apply(from_profile(project(to_profile(state), "P_minus", R),
                                    state.grid, t=state.t),
                       t, cutoffs, cfg)), "P_plus", R)
    # factored path
    inner = from_profile(project(to_profile(state), "P_minus", R),
                         state.grid, t=state.t)
    m1 = m_apply(inner, cutoffs, cfg)
    mid = kg_group_apply(m1, t - 4.0 * R, cutoffs, cfg)
    m2 = m_apply(mid, cutoffs, cfg)
    k_fact = project(to_profile(m2), "P_plus", R)
    diff = k_direct.k - k_fact.k
    return float(np.sqrt(np.trapezoid(diff ** 2, dx=k_direct.ds))) / phi_norm


def adjoint_identity_residual(g: RadialState, phi: RadialState, t: float,
                              cutoffs: CutoffPair, cfg: SchemeConfig) -> float:
    """Weak test of the adjoint identity on incoming data:
    <U_KG(t) phi, g>_H = <phi, U(-t) g>_H, relative to ||phi|| ||g||."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    leak = subspace_leak(to_profile(g), SubspaceTag("D_minus", cutoffs.R))
    if leak > 1e-8:
        raise NotIncoming(f"representer of g leaks {leak:.3e} above -R")
    lhs = energy_inner(kg_group_apply(phi, t, cutoffs, cfg), g)
    rhs = energy_inner(phi, free_wave_exact(g, -t))
    denom = energy_norm(phi) * energy_norm(g)
    if denom == 0.0:
        return 0.0
    return abs(lhs - rhs) / denom


# ---------------------------------------------------------------------------
# random profiles and ensemble probes
# ---------------------------------------------------------------------------

def _band_profile(grid: RadialGrid, lo: float, hi: float,
                  rng: np.random.Generator, n_modes: int = 6) -> TranslationProfile:
    """Zero-mean band-limited representer supported in [lo, hi]: the
    derivative of a random trig polynomial under a smooth bump, so the
    reconstructed state is compactly supported."""
    s = np.arange(2 * grid.n - 1) * grid.dr - grid.r_max
    c = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    xi = (s - c) / half
    inside = np.abs(xi) < 1.0
    window = np.zeros_like(s)
    dwindow = np.zeros_like(s)
    one = 1.0 - xi[inside] ** 2
    window[inside] = np.exp(1.0 - 1.0 / one)
    dwindow[inside] = window[inside] * (-2.0 * xi[inside] / one ** 2) / half
    coeffs = rng.standard_normal(n_modes)
    trig = np.zeros_like(s)
    dtrig = np.zeros_like(s)
    for j, cj in enumerate(coeffs, start=1):
        arg = j * np.pi * (s - c) / half
        trig += cj * np.sin(arg)
        dtrig += cj * (j * np.pi / half) * np.cos(arg)
    k = dwindow * trig + window * dtrig
    nrm = math.sqrt(max(1e-300, float(np.trapezoid(k ** 2, dx=grid.dr))))
    return TranslationProfile(-grid.r_max, grid.r_max, grid.dr, k / nrm)


def random_interaction_profile(grid: RadialGrid, R: float, seed: int,
                               fill: float = 0.9) -> TranslationProfile:
    """Unit-norm representer supported in [-fill*R, fill*R] (a K element)."""
    rng = np.random.default_rng(seed)
    return _band_profile(grid, -fill * R, fill * R, rng)


def random_incoming_profile(grid: RadialGrid, R: float, extent: float,
                            seed: int) -> TranslationProfile:
    """Unit-norm representer supported in [-R - extent, -R] (a D- element)."""
    rng = np.random.default_rng(seed)
    return _band_profile(grid, -R - extent, -R, rng)


def _stack_states(profiles: list[TranslationProfile], grid: RadialGrid):
    ws, vs = [], []
    for p in profiles:
        w, v = _wv_from_k(p.k, p.ds)
        ws.append(w)
        vs.append(v)
    return np.stack(ws, axis=1), np.stack(vs, axis=1)


def _evolve_linear_stack(W: np.ndarray, V: np.ndarray, t: float,
                         cutoffs: CutoffPair, cfg: SchemeConfig,
                         grid: RadialGrid, checkpoints: list[float]):
    """Evolve a stack of fields under the localized linear equation,
    yielding (time, W, V) at each requested checkpoint."""
    kern = _Kernel(grid, cutoffs.linearized())
    dt_target = cfl_limit(grid, cfg.cfl)
    out = []
    tt = 0.0
    for t_next in checkpoints:
        seg = t_next - tt
        if seg > 0:
            n_steps, dt = _pick_steps(seg, dt_target)
            for _ in range(n_steps):
                W, V = kern.step(W, V, tt, dt, cfg)
                tt += dt
        tt = t_next
        out.append((tt, W.copy(), V.copy()))
    return out


def probe_norm(op: str, *, seed: int, ensemble_size: int, cutoffs: CutoffPair,
               cfg: SchemeConfig, grid: RadialGrid,
               time: float | None = None) -> OperatorProbe:
    """Deterministic random-ensemble probe of ||Op phi|| / ||phi|| over
    K-supported unit profiles; max_ratio is an empirical lower bound on the
    operator norm.

    op is one of identity, p_plus, p_minus, u_kg, z; u_kg and z need a time.
    """
    R = cutoffs.R
    profiles = [random_interaction_profile(grid, R, seed + 7919 * i)
                for i in range(ensemble_size)]
    if op == "identity":
        ratios = [energy_norm(from_profile(p, grid)) / p.norm() for p in profiles]
    elif op in ("p_plus", "p_minus"):
        which = "P_plus" if op == "p_plus" else "P_minus"
        ratios = [project(p, which, R).norm() / p.norm() for p in profiles]
    elif op in ("u_kg", "z"):
        if time is None:
            raise ValueError(f"op {op!r} needs a time")
        ladder = probe_z_ladder([time], seed=seed, ensemble_size=ensemble_size,
                                cutoffs=cutoffs, cfg=cfg, grid=grid,
                                project_plus=(op == "z"))
        return ladder[time]
    else:
        raise ValueError(f"unknown operator tag {op!r}")
    ratios = np.asarray(ratios)
    return OperatorProbe(seed, ensemble_size, ratios, float(np.max(ratios)))


def probe_z_ladder(times, *, seed: int, ensemble_size: int, cutoffs: CutoffPair,
                   cfg: SchemeConfig, grid: RadialGrid,
                   project_plus: bool = True) -> dict:
    """Probe Z_KG (or U_KG when project_plus is False) at several times with
    one shared stacked evolution per ensemble."""
    R = cutoffs.R
    times = sorted(times)
    profiles = [random_interaction_profile(grid, R, seed + 7919 * i)
                for i in range(ensemble_size)]
    # K probes are fixed by P-, so the inner projection is the identity here;
    # apply it anyway to stay faithful to the operator definition.
    projected = [project(p, "P_minus", R) for p in profiles]
    norms = np.array([p.norm() for p in profiles])
    W, V = _stack_states(projected, grid)
    out = {}
    for tt, Wt, Vt in _evolve_linear_stack(W, V, times[-1], cutoffs, cfg, grid,
                                           checkpoints=list(times)):
        k = _k_from_wv(Wt, Vt, grid.dr)
        if project_plus:
            s = np.arange(k.shape[0]) * grid.dr - grid.r_max
            k = np.where((s >= R - 1e-12)[:, None], 0.0, k)
        vals = np.sqrt(np.trapezoid(k ** 2, dx=grid.dr, axis=0))
        ratios = vals / norms
        out[tt] = OperatorProbe(seed, ensemble_size, ratios,
                                float(np.max(ratios)))
    return out


def outgoing_shell_profile(grid: RadialGrid, center: float, width: float,
                           amplitude: float) -> TranslationProfile:
    """Zero-mean representer supported in [center - width, center + width]:
    pure outgoing data when center - width >= R."""
    s = np.arange(2 * grid.n - 1) * grid.dr - grid.r_max
    xi = (s - center) / width
    inside = np.abs(xi) < 1.0
    k = np.zeros_like(s)
    one = 1.0 - xi[inside] ** 2
    # derivative of the standard bump: compact, zero mean
    k[inside] = amplitude * np.exp(1.0 - 1.0 / one) * (-2.0 * xi[inside] / one ** 2) / width
    return TranslationProfile(-grid.r_max, grid.r_max, grid.dr, k)
