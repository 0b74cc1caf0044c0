"""Rydberg wavefunctions: Numerov radial solutions and angular functions.

The radial equation is integrated inward on a grid uniform in x = sqrt(r),
where the transformed equation w''(x) = -K(x) w(x) with w = u / sqrt(x),
K(x) = 8 E x^2 + 8 - (4 l (l+1) + 3/4) / x^2 is Numerov-friendly and the
grid automatically concentrates points near the core. Angular parts use the
orthonormal spherical harmonics with the Condon-Shortley phase (scipy
convention); gradients evaluate the analytic three-component expression.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import sph_harm_y

from . import kernels
from .atomic_data import SpeciesData, effective_principal, level_energy


class ConvergenceError(RuntimeError):
    """Radial solution failed validation (wrong node count or bad norm)."""


@dataclass(frozen=True)
class RydbergState:
    """|n l j m> with m the total-angular-momentum projection."""

    n: int
    l: int
    j: float
    m: float
    species: SpeciesData

    def __post_init__(self):
        if not 0 <= self.l < self.n:
            raise ValueError(f"require 0 <= l < n, got n={self.n}, l={self.l}")
        allowed_j = {self.l + 0.5} if self.l == 0 else {self.l - 0.5, self.l + 0.5}
        if self.j not in allowed_j:
            raise ValueError(f"j={self.j} invalid for l={self.l}")
        if abs(self.m) > self.j or (round(2 * self.m) - 2 * self.m) != 0 or int(round(2 * self.m)) % 2 == 0:
            raise ValueError(f"m={self.m} invalid for j={self.j}")

    @property
    def n_star(self):
        return effective_principal(self.species, self.n, self.l, self.j)

    @property
    def energy(self):
        return level_energy(self.species, self.n, self.l, self.j)

    def label(self):
        return f"{self.n}{'SPDFGHIKLM'[self.l] if self.l < 10 else 'l' + str(self.l)}{self.j}:m={self.m}"

    def spin_orbital_components(self):
        """Clebsch-Gordan decomposition onto (m_l, m_s) orbital channels.

        Returns a fixed 2-tuple ((m_l, coeff) for m_s = +1/2, the same for
        m_s = -1/2); channels closed by |m_l| > l carry coefficient 0.
        Condon-Shortley conventions.
        """
        l, j, m = self.l, self.j, self.m
        if abs(j - (l + 0.5)) < 1e-9:
            up = math.sqrt((l + m + 0.5) / (2 * l + 1))
            dn = math.sqrt((l - m + 0.5) / (2 * l + 1))
        else:
            up = -math.sqrt((l - m + 0.5) / (2 * l + 1))
            dn = math.sqrt((l + m + 0.5) / (2 * l + 1))
        ml_up = int(round(m - 0.5))
        ml_dn = int(round(m + 0.5))
        if abs(ml_up) > l:
            ml_up, up = 0, 0.0
        if abs(ml_dn) > l:
            ml_dn, dn = 0, 0.0
        return ((ml_up, up), (ml_dn, dn))


@dataclass(frozen=True)
class GridSpec:
    """Radial grid control for the Numerov integration.

    points_per_oscillation sets the x-grid density against the shortest local
    de Broglie wavelength; inner_fraction scales the classical inner turning
    point down to the truncation radius; outer_margin extends the grid past
    the outer turning point (in units of n*).
    """

    points_per_oscillation: float = 12.0
    inner_fraction: float = 0.7
    outer_margin: float = 15.0
    r_floor: float = 1e-3

    def key(self):
        return (self.points_per_oscillation, self.inner_fraction, self.outer_margin, self.r_floor)


@dataclass(frozen=True)
class RadialWave:
    """Reduced radial solution u(r) = r R(r), normalized to unit integral."""

    grid: np.ndarray
    u: np.ndarray
    du_dr: np.ndarray
    norm_check: float

    @cached_property
    def _spline(self):
        return CubicSpline(self.grid, self.u)

    def u_at(self, r):
        return self._spline(r)

    def du_at(self, r):
        return self._spline(r, 1)

    def R_at(self, r):
        return self._spline(r) / r

    def dR_at(self, r):
        """dR/dr from the cubic interpolant of u."""
        r = np.asarray(r, dtype=float)
        return self._spline(r, 1) / r - self._spline(r) / r**2


def _turning_points(n_star, l):
    """Inner and outer classical turning points of the Coulomb motion."""
    disc = max(n_star**2 - l * (l + 1), 0.0)
    root = n_star * math.sqrt(disc)
    return n_star**2 - root, n_star**2 + root


def radial_solve(state: RydbergState, grid_spec: GridSpec = GridSpec()) -> RadialWave:
    """Numerov integration of the reduced radial wave, outer edge inward.

    The energy is the quantum-defect value -Ry/n*^2 in a pure Coulomb tail;
    the wave is truncated at inner_fraction times the inner turning point
    (floored at r_floor), which suppresses the core region the defect model
    does not describe. Raises ConvergenceError when the node count disagrees
    with n - l - 1.
    """
    n_star = state.n_star
    # Coulomb tail -1/r at E = -1/(2 n*^2): the defect enters only through
    # n*, the percent-level reduced-mass correction only through level_energy.
    energy = -1.0 / (2.0 * n_star**2)
    r_in_turn, r_out_turn = _turning_points(n_star, state.l)
    r_in = max(grid_spec.inner_fraction * r_in_turn, grid_spec.r_floor)
    r_out = 2.0 * n_star * (n_star + grid_spec.outer_margin)

    x_in, x_out = math.sqrt(r_in), math.sqrt(r_out)
    cent = 4.0 * state.l * (state.l + 1) + 0.75

    def coef_of(x):
        return 8.0 * energy * x * x + 8.0 - cent / (x * x)

    # grid density from the largest local |K| in x: oscillation in the allowed
    # region, decay rate in the forbidden ones, both need resolving
    xs_probe = np.linspace(x_in, x_out, 512)
    k_probe = np.abs(np.array([coef_of(x) for x in xs_probe]))
    k_max = max(float(k_probe.max()), 1.0)
    h = 2.0 * math.pi / math.sqrt(k_max) / grid_spec.points_per_oscillation
    n_pts = max(int(math.ceil((x_out - x_in) / h)) + 1, 32)
    xs = np.linspace(x_in, x_out, n_pts)
    h = xs[1] - xs[0]

    coef = 8.0 * energy * xs * xs + 8.0 - cent / (xs * xs)
    w = kernels.numerov_inward(coef, h)

    rs = xs * xs
    u = w * np.sqrt(xs)

    # sign convention: positive outermost antinode
    i_peak = int(np.argmax(np.abs(u)))
    if u[i_peak] < 0:
        u = -u

    # normalization on the x grid: integral u^2 dr = 2 integral x^2 w^2 dx
    norm2 = 2.0 * _simpson(xs * xs * w * w, h)
    u = u / math.sqrt(norm2)

    # Sturm count inside the classical band. The core region carries one lost
    # oscillation per unit of quantum defect, so the defect-truncated tail
    # shows n* - l - 1 sign changes up to the rounding of a fractional n*;
    # hydrogenic states (integer n*) must land exactly on n - l - 1.
    allowed = (rs >= r_in_turn) & (rs <= r_out_turn)
    nodes = _count_nodes(u[allowed])
    expected = n_star - state.l - 1
    if abs(nodes - expected) > 0.75:
        raise ConvergenceError(
            f"node count {nodes} vs expected {expected:.2f} for {state.label()}; "
            "grid too coarse or domain too tight"
        )

    # derivative du/dr = (w/(2 sqrt(x)) + sqrt(x) w') / (2x) on the x grid
    dw = _fourth_order_derivative(w, h)
    du_dr = (0.5 * w / np.sqrt(xs) + np.sqrt(xs) * dw) / (2.0 * xs)

    check = abs(2.0 * _trapezoid(xs * xs * (w / math.sqrt(norm2)) ** 2, h) - 1.0)
    return RadialWave(grid=rs, u=u, du_dr=du_dr, norm_check=check)


def _simpson(y, h):
    n = y.size
    if n % 2 == 0:
        core = y[:-1]
        tail = 0.5 * h * (y[-2] + y[-1])
    else:
        core = y
        tail = 0.0
    m = core.size
    s = core[0] + core[-1] + 4.0 * core[1:-1:2].sum() + 2.0 * core[2:-1:2].sum()
    return s * h / 3.0 + tail


def _trapezoid(y, h):
    return h * (y.sum() - 0.5 * (y[0] + y[-1]))


def _count_nodes(u):
    # ignore the numerically dead tails when counting sign changes
    mag = np.abs(u)
    live = mag > 1e-8 * mag.max()
    idx = np.nonzero(live)[0]
    core = u[idx[0] : idx[-1] + 1]
    signs = np.sign(core)
    signs = signs[signs != 0]
    return int(np.sum(signs[1:] * signs[:-1] < 0))


def _fourth_order_derivative(y, h):
    d = np.zeros_like(y)
    d[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)
    d[0] = (-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12 * h)
    d[1] = (-3 * y[0] - 10 * y[1] + 18 * y[2] - 6 * y[3] + y[4]) / (12 * h)
    d[-2] = (3 * y[-1] + 10 * y[-2] - 18 * y[-3] + 6 * y[-4] - y[-5]) / (12 * h)
    d[-1] = (25 * y[-1] - 48 * y[-2] + 36 * y[-3] - 16 * y[-4] + 3 * y[-5]) / (12 * h)
    return d


def spherical_harmonic(l, m, theta, phi):
    """Orthonormal Y_l^m(theta, phi) with the Condon-Shortley phase."""
    if abs(m) > l:
        raise ValueError(f"require |m| <= l, got l={l}, m={m}")
    return sph_harm_y(l, m, theta, phi)


def _theta_derivative(l, m, theta, phi):
    """d/dtheta Y_l^m via the Y_l^{m+-1} recombination identity."""
    up = 0.0
    dn = 0.0
    if abs(m + 1) <= l:
        up = math.sqrt((l - m) * (l + m + 1)) * sph_harm_y(l, m + 1, theta, phi) * np.exp(-1j * phi)
    if abs(m - 1) <= l:
        dn = math.sqrt((l + m) * (l - m + 1)) * sph_harm_y(l, m - 1, theta, phi) * np.exp(1j * phi)
    return 0.5 * (up - dn)


POLE_TOLERANCE_RAD = 1e-6


def gradient_psi(state_or_lm, radial: RadialWave, point):
    """Spherical gradient components of psi = R_nl(r) Y_l^m at (r, theta, phi).

    Accepts either an orbital (l, m) pair or a RydbergState restricted to a
    single orbital channel. Returns (d_r, r^-1 d_theta, (r sin theta)^-1 d_phi)
    as a complex 3-vector. Rejects evaluations within POLE_TOLERANCE_RAD of
    the poles when m != 0.
    """
    if isinstance(state_or_lm, RydbergState):
        comps = [(ml, cg) for ml, cg in state_or_lm.spin_orbital_components() if cg != 0.0]
        if len(comps) != 1:
            raise ValueError("state mixes spin channels; pass an explicit (l, m) orbital instead")
        l, m = state_or_lm.l, comps[0][0]
    else:
        l, m = state_or_lm
    r, theta, phi = point
    if m != 0 and min(abs(theta), abs(math.pi - theta)) < POLE_TOLERANCE_RAD:
        raise ValueError(f"gradient at theta={theta} within {POLE_TOLERANCE_RAD} rad of a pole with m != 0")
    y = sph_harm_y(l, m, theta, phi)
    r_val = radial.R_at(r)
    dr_val = radial.dR_at(r)
    g_r = dr_val * y
    g_theta = r_val / r * _theta_derivative(l, m, theta, phi)
    if m == 0:
        g_phi = 0.0 + 0.0j
    else:
        g_phi = 1j * m * r_val * y / (r * math.sin(theta))
    return np.array([g_r, g_theta, g_phi], dtype=complex)
