"""Grids, field states, cutoff profiles, initial-data presets and the
KG-admissibility checker.

The radial reduction works throughout in the variable w = r*u on a uniform
half-line grid, so a field configuration is the pair (w, dt w) with w(0) = 0
forced by regularity of u at the origin.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import ConditionViolated, GridTooSmall, SupportTooLarge

#: absolute tolerance for the pointwise cutoff conditions
TOL_COND = 1e-10


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid on [0, r_max] with nodes r_i = i*dr, node 0 at the origin."""

    r_max: float
    n: int

    def __post_init__(self):
        if self.n < 16:
            raise ValueError(f"need at least 16 nodes, got {self.n}")
        if not (self.r_max > 0 and math.isfinite(self.r_max)):
            raise ValueError(f"r_max must be positive and finite, got {self.r_max}")

    @property
    def dr(self) -> float:
        return self.r_max / (self.n - 1)

    @cached_property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, self.r_max, self.n)


def make_grid(r_max: float, dr: float) -> RadialGrid:
    """Grid with spacing exactly dr; r_max is rounded up to a node multiple."""
    if dr <= 0:
        raise ValueError("dr must be positive")
    n = int(math.ceil(r_max / dr - 1e-12)) + 1
    return RadialGrid(r_max=(n - 1) * dr, n=n)


def required_r_max(r_data: float, t_final: float, r_obs: float, dr: float,
                   margin: float | None = None) -> float:
    """Smallest admissible outer radius for a run of length t_final.

    The outer Dirichlet wall is inert when a signal leaving the data support
    must travel to the wall and back before reaching the observation ball,
    which holds for r_max >= r_data + t_final/2 + r_obs + 2*dr.  The default
    margin doubles the 2*dr safety term.
    """
    if margin is None:
        margin = 4.0 * dr
    return r_data + 0.5 * t_final + r_obs + 2.0 * dr + margin


def radial_derivative(w: np.ndarray, dr: float) -> np.ndarray:
    """Centered d/dr of a nodal field, odd extension at the origin.

    Node 0 uses (w[1] - w[-1])/(2 dr) = w[1]/dr, valid because w = r*u is odd;
    the outer endpoint uses a second-order one-sided stencil.
    """
    out = np.empty_like(w)
    out[1:-1] = (w[2:] - w[:-2]) / (2.0 * dr)
    out[0] = w[1] / dr
    out[-1] = (3.0 * w[-1] - 4.0 * w[-2] + w[-3]) / (2.0 * dr)
    return out


def u_from_w(w: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """u = w/r with the parity limit u(0) = w'(0)."""
    u = np.empty_like(w)
    u[1:] = w[1:] / grid.r[1:]
    u[0] = w[1] / grid.dr
    return u


# ---------------------------------------------------------------------------
# field state
# ---------------------------------------------------------------------------

@dataclass
class RadialState:
    """The pair (w, dt w) at one instant; w = r*u.

    w[0] = 0 always (Dirichlet at the origin).  States produced by the data
    presets and evolved by the solver also satisfy w[-1] = 0; states
    reconstructed from projected translation representers may instead carry a
    constant far field (a 1/r tail of u), which the solver pins at the wall.
    """

    t: float
    w: np.ndarray
    v: np.ndarray
    grid: RadialGrid

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.w.shape != (self.grid.n,) or self.v.shape != (self.grid.n,):
            raise ValueError("field arrays must match the grid")
        if self.w[0] != 0.0:
            raise ValueError("w[0] must vanish exactly (origin regularity)")
        if not (np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.v))):
            raise ValueError("field arrays must be finite")

    def copy(self) -> "RadialState":
        return RadialState(self.t, self.w.copy(), self.v.copy(), self.grid)

    def dwdr(self) -> np.ndarray:
        return radial_derivative(self.w, self.grid.dr)

    def u(self) -> np.ndarray:
        return u_from_w(self.w, self.grid)


def zero_state(grid: RadialGrid, t: float = 0.0) -> RadialState:
    return RadialState(t, np.zeros(grid.n), np.zeros(grid.n), grid)


# ---------------------------------------------------------------------------
# cutoff profiles
# ---------------------------------------------------------------------------

def bump(r: np.ndarray, radius: float, amplitude: float = 1.0) -> np.ndarray:
    """Smooth compactly supported bump a*exp(1 - 1/(1 - (r/radius)^2))."""
    r = np.asarray(r, dtype=float)
    x2 = (r / radius) ** 2
    out = np.zeros_like(r)
    inside = x2 < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - x2[inside]))
    return out


def bump_derivative(r: np.ndarray, radius: float, amplitude: float = 1.0) -> np.ndarray:
    """Analytic d/dr of :func:`bump`."""
    r = np.asarray(r, dtype=float)
    x = r / radius
    out = np.zeros_like(r)
    inside = x ** 2 < 1.0
    xi = x[inside]
    one = 1.0 - xi ** 2
    out[inside] = amplitude * np.exp(1.0 - 1.0 / one) * (-2.0 * xi / one ** 2) / radius
    return out


def plateau_window(r: np.ndarray, radius: float, plateau_fraction: float = 0.8) -> np.ndarray:
    """Window equal to 1 on [0, f*radius], bump-shaped decay to 0 at radius."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    r0 = plateau_fraction * radius
    out[r <= r0] = 1.0
    trans = (r > r0) & (r < radius)
    xi = (r[trans] - r0) / (radius - r0)
    out[trans] = np.exp(1.0 - 1.0 / (1.0 - xi ** 2))
    return out


@dataclass
class CutoffPair:
    """Sampled profiles of the potential cutoff chi1 and the nonlinearity
    cutoff chi2, with their radial derivatives.

    Both profiles are nonnegative, supported in the ball of radius R, chi1 is
    radially nonincreasing (r*chi1' <= 0) and chi2 satisfies the pointwise
    multiplier condition r*chi2' <= 4*chi2.
    """

    R: float
    chi1: np.ndarray
    chi2: np.ndarray
    dchi1: np.ndarray
    dchi2: np.ndarray
    a1: float
    a2: float
    grid: RadialGrid = field(repr=False)

    def __post_init__(self):
        for name in ("chi1", "chi2", "dchi1", "dchi2"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.n,):
                raise ValueError(f"{name} must be sampled on the grid")
            setattr(self, name, arr)
        self.validate()

    def validate(self) -> None:
        r = self.grid.r
        for name, chi in (("chi1", self.chi1), ("chi2", self.chi2)):
            bad = np.flatnonzero(chi < -TOL_COND)
            if bad.size:
                raise ConditionViolated(int(bad[0]), f"{name} >= 0", float(chi[bad[0]]))
            bad = np.flatnonzero((r >= self.R) & (np.abs(chi) > TOL_COND))
            if bad.size:
                raise ConditionViolated(int(bad[0]), f"supp {name} in B_R",
                                        float(chi[bad[0]]))
        lhs1 = r * self.dchi1
        bad = np.flatnonzero(lhs1 > TOL_COND)
        if bad.size:
            raise ConditionViolated(int(bad[0]), "r*chi1' <= 0", float(lhs1[bad[0]]))
        lhs2 = r * self.dchi2 - 4.0 * self.chi2
        bad = np.flatnonzero(lhs2 > TOL_COND)
        if bad.size:
            raise ConditionViolated(int(bad[0]), "r*chi2' <= 4*chi2",
                                    float(lhs2[bad[0]]))

    def is_zero(self) -> bool:
        return self.a1 == 0.0 and self.a2 == 0.0

    def linearized(self) -> "CutoffPair":
        """Same chi1, chi2 dropped (the localized linear configuration)."""
        z = np.zeros(self.grid.n)
        return CutoffPair(self.R, self.chi1, z, self.dchi1, z.copy(),
                          self.a1, 0.0, self.grid)

    def min_multiplier_coefficient(self) -> float:
        """min over nodes of (2/3)chi2 - (1/6) r chi2', reported for honesty
        of the monotonicity checks (nonnegative under the corrected condition
        combined with chi2 >= 0)."""
        return float(np.min((2.0 / 3.0) * self.chi2
                            - (1.0 / 6.0) * self.grid.r * self.dchi2))


def make_cutoff_pair(R: float, a1: float, a2: float, grid: RadialGrid) -> CutoffPair:
    """Build the standard bump cutoffs of support radius R and amplitudes a1, a2."""
    if R <= 0:
        raise ValueError("R must be positive")
    if a1 < 0 or a2 < 0:
        raise ValueError("amplitudes must be nonnegative")
    if R >= grid.r_max:
        raise GridTooSmall(f"cutoff support radius {R} must lie inside r_max={grid.r_max}")
    r = grid.r
    return CutoffPair(
        R=R,
        chi1=bump(r, R, a1), chi2=bump(r, R, a2),
        dchi1=bump_derivative(r, R, a1), dchi2=bump_derivative(r, R, a2),
        a1=a1, a2=a2, grid=grid,
    )


def zero_cutoffs(grid: RadialGrid, R: float = 1.0) -> CutoffPair:
    z = np.zeros(grid.n)
    return CutoffPair(R, z, z.copy(), z.copy(), z.copy(), 0.0, 0.0, grid)


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdmissiblePair:
    """Candidate exponent tuple for the KG-admissible and gap conditions.

    q or r may be math.inf, with 1/inf = 0.
    """

    q: float
    r: float
    n: int = 3
    theta: float = 0.0
    s: float = 1.0

    def __post_init__(self):
        if self.q < 2 or self.r < 2:
            raise ValueError("q and r must lie in [2, inf]")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")


class AdmissibilityResult(NamedTuple):
    admissible: bool
    gap_residual: float


GAP_TOL = 1e-12


def _inv(x: float) -> float:
    return 0.0 if math.isinf(x) else 1.0 / x


def check_admissibility(p: AdmissiblePair) -> AdmissibilityResult:
    """Evaluate the admissibility inequality, the excluded tuple and the gap
    condition; total on its domain."""
    n, theta = p.n, p.theta
    ineq = 2.0 * _inv(p.q) + (n - 1 + theta) * _inv(p.r) <= (n - 1 + theta) / 2.0 + GAP_TOL
    excluded = (p.q == 2 and math.isinf(p.r) and n == 3 and theta == 0.0)
    gap_residual = _inv(p.q) + (n + theta) * _inv(p.r) - ((n + theta) / 2.0 - p.s)
    admissible = ineq and not excluded and abs(gap_residual) <= GAP_TOL
    return AdmissibilityResult(admissible, gap_residual)


def is_strichartz_pair(q: float, r: float, n: int = 3, s: float = 1.0,
                       theta_step: float = 0.01) -> bool:
    """True when some theta on a theta_step grid in [0, 1] makes (q, r)
    KG-admissible with the gap condition at regularity s."""
    k = 0
    while True:
        theta = min(k * theta_step, 1.0)
        if check_admissibility(AdmissiblePair(q, r, n, theta, s)).admissible:
            return True
        if theta >= 1.0:
            return False
        k += 1


# ---------------------------------------------------------------------------
# initial data presets
# ---------------------------------------------------------------------------

PRESET_KINDS = ("gaussian_bump", "polynomial_bump", "outgoing_shell", "random_band")


@dataclass(frozen=True)
class DataPreset:
    kind: str
    center: float = 0.0
    width: float = 0.35
    amplitude: float = 1.0
    support_radius: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PRESET_KINDS:
            raise ValueError(f"unknown preset kind {self.kind!r}")
        if self.support_radius <= 0 or self.width <= 0:
            raise ValueError("width and support_radius must be positive")


def make_initial_data(preset: DataPreset, grid: RadialGrid) -> RadialState:
    """Sample a preset onto the grid; deterministic per seed.

    All presets return states supported in B_{support_radius} with w[0] = 0
    and with zero-mean translation representers (no far-field tail).
    """
    if preset.support_radius >= grid.r_max:
        raise SupportTooLarge(
            f"support radius {preset.support_radius} must lie inside "
            f"r_max={grid.r_max}")
    r = grid.r
    a = preset.support_radius
    w = np.zeros(grid.n)
    v = np.zeros(grid.n)

    if preset.kind == "gaussian_bump":
        w = preset.amplitude * r * np.exp(-(((r - preset.center) / preset.width) ** 2))
        w *= plateau_window(r, a)
    elif preset.kind == "polynomial_bump":
        inside = r < a
        w[inside] = preset.amplitude * r[inside] * (1.0 - (r[inside] / a) ** 2) ** 3
    elif preset.kind == "outgoing_shell":
        # representer k = d/ds of a bump centered mid-shell: pure outgoing
        # data, supported in [center-width, center+width] on the s-line.
        from .laxphillips import from_profile, outgoing_shell_profile
        prof = outgoing_shell_profile(grid, preset.center, preset.width,
                                      preset.amplitude)
        state = from_profile(prof, grid)
        if preset.center + preset.width > a + 1e-12:
            raise SupportTooLarge("shell extends past the declared support radius")
        return state
    elif preset.kind == "random_band":
        rng = np.random.default_rng(preset.seed)
        n_modes = 6
        coeffs = rng.standard_normal(n_modes)
        window = bump(r, a)
        phase = np.zeros(grid.n)
        for j, c in enumerate(coeffs, start=1):
            phase += c * np.sin(j * np.pi * r / a)
        w = preset.amplitude * window * phase
        vcoeffs = rng.standard_normal(n_modes)
        vphase = np.zeros(grid.n)
        for j, c in enumerate(vcoeffs, start=1):
            vphase += c * np.sin(j * np.pi * r / a)
        v = preset.amplitude * window * vphase
    w[0] = 0.0
    w[r >= a] = 0.0
    v[r >= a] = 0.0
    return RadialState(0.0, w, v, grid)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def export_profile_csv(path, grid: RadialGrid, values: np.ndarray,
                       header: tuple[str, str] = ("r", "value")) -> None:
    """Two-column CSV dump of a radial profile."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for ri, vi in zip(grid.r, values):
            writer.writerow([f"{ri:.17g}", f"{vi:.17g}"])
