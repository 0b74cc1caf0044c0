"""Potential energy curves from Fermi scattering of the Rydberg electron.

A truncated manifold of |n l j m> states is coupled by the contact
pseudopotential of a ground-state perturber sitting at position (R, theta,
phi) relative to the ionic core,

    V = 2 pi a_s(k) psi_a^* psi_b + 6 pi a_p^3(k) grad psi_a^* . grad psi_b,

with a_s(k) = -tan d_s(k) / k and a_p^3(k) = -tan d_p(k) / k^3, so a
negative triplet scattering length gives the attractive curves these traps
rely on. Diagonalizing at each perturber position and following the target
state by eigenvector overlap yields the curve; evaluating it at displaced
lattice sites gives the per-site level shifts the gate detunings are built
from. Atomic units throughout; energies convert to 2pi x MHz at the module
boundary.
"""

import hashlib
import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .atomic_data import SpeciesData, phase_shifts
from .constants import HARTREE_TO_2PI_MHZ, NM_TO_BOHR, au_to_nm
from .wavefunctions import GridSpec, RadialWave, RydbergState, radial_solve, spherical_harmonic, _theta_derivative

OVERLAP_TIE_THRESHOLD = 1e-3


@dataclass(frozen=True)
class BasisSpec:
    """Named manifolds plus an |m_j| cutoff.

    Each manifold entry is (n, l, j) with l = -1 meaning the whole
    quasi-degenerate high-l tower 3 <= l < n and j = None meaning both
    fine-structure branches. m_max caps |m_j| at m_max + 1/2 (None = no cap).
    """

    manifolds: tuple
    m_max: int | None = None

    def describe(self):
        parts = []
        for n, l, j in self.manifolds:
            if l == -1:
                parts.append(f"{n}H")
            else:
                parts.append(f"{n}l{l}" + (f"j{j}" if j is not None else ""))
        cap = f"|m|<={self.m_max}+1/2" if self.m_max is not None else "all m"
        return "+".join(parts) + f", {cap}"


@dataclass(frozen=True)
class Basis:
    states: tuple
    description: str

    def __len__(self):
        return len(self.states)


def build_basis(center: RydbergState, spec: BasisSpec) -> Basis:
    """Deterministically ordered coupled-state set containing the center."""
    species = center.species
    state_set = {}

    def add(n, l, j):
        m_cap = j if spec.m_max is None else min(j, spec.m_max + 0.5)
        m = -m_cap
        while m <= m_cap + 1e-9:
            st = RydbergState(n, l, j, m, species)
            state_set[(n, l, j, m)] = st
            m += 1.0

    for n, l, j in spec.manifolds:
        if l == -1:
            for ll in range(3, n):
                for jj in (ll - 0.5, ll + 0.5):
                    add(n, ll, jj)
        elif j is None:
            js = (0.5,) if l == 0 else (l - 0.5, l + 0.5)
            for jj in js:
                add(n, l, jj)
        else:
            add(n, l, float(j))
    add(center.n, center.l, center.j)

    if not state_set:
        raise ValueError("empty basis")
    ordered = tuple(state_set[k] for k in sorted(state_set))
    return Basis(states=ordered, description=BasisSpec(spec.manifolds, spec.m_max).describe())


def semiclassical_k(r_au: float, n_star: float) -> float:
    """Local electron momentum k = sqrt(2 (1/R - 1/(2 n*^2))), floored.

    Beyond the classical turning point R = 2 n*^2 the momentum is evaluated
    at 0.999 of the turning radius, keeping the scattering amplitudes finite.
    """
    if r_au <= 0:
        raise ValueError("R must be positive")
    r_turn = 2.0 * n_star**2
    r_eff = min(r_au, 0.999 * r_turn)
    return math.sqrt(2.0 * (1.0 / r_eff - 1.0 / (2.0 * n_star**2)))


def beyond_turning_point(r_au: float, n_star: float) -> bool:
    return r_au >= 2.0 * n_star**2


class BasisEvaluator:
    """Caches radial solutions and evaluates psi / grad psi state-by-state."""

    def __init__(self, basis: Basis, grid_spec: GridSpec = GridSpec()):
        self.basis = basis
        self.grid_spec = grid_spec
        self._radial = {}

    def radial(self, n, l, j) -> RadialWave:
        key = (n, l, j)
        if key not in self._radial:
            probe = RydbergState(n, l, j, j, self.basis.states[0].species)
            self._radial[key] = radial_solve(probe, self.grid_spec)
        return self._radial[key]

    def components_at(self, point):
        """Spinor amplitudes and gradients of every basis state at one point.

        Returns (psi, grad): psi has shape (N, 2) over m_s = (+1/2, -1/2),
        grad has shape (N, 2, 3) with spherical components.
        """
        r, theta, phi = point
        n_states = len(self.basis.states)
        psi = np.zeros((n_states, 2), dtype=complex)
        grad = np.zeros((n_states, 2, 3), dtype=complex)
        y_cache = {}
        dy_cache = {}

        def y_at(l, m):
            key = (l, m)
            if key not in y_cache:
                y_cache[key] = spherical_harmonic(l, m, theta, phi)
            return y_cache[key]

        def dy_at(l, m):
            key = (l, m)
            if key not in dy_cache:
                dy_cache[key] = _theta_derivative(l, m, theta, phi)
            return dy_cache[key]

        sin_theta = math.sin(theta)
        for i, st in enumerate(self.basis.states):
            rw = self.radial(st.n, st.l, st.j)
            if r <= rw.grid[0] or r >= rw.grid[-1]:
                continue  # outside the solved domain the wave is negligible
            r_val = rw.R_at(r)
            dr_val = rw.dR_at(r)
            for slot, (ml, cg) in enumerate(st.spin_orbital_components()):
                if cg == 0.0:
                    continue
                y = y_at(st.l, ml)
                psi[i, slot] = cg * r_val * y
                grad[i, slot, 0] = cg * dr_val * y
                grad[i, slot, 1] = cg * (r_val / r) * dy_at(st.l, ml)
                if ml != 0:
                    grad[i, slot, 2] = cg * 1j * ml * r_val * y / (r * sin_theta)
        return psi, grad


def scattering_prefactors(species: SpeciesData, k: float):
    """(c_s, c_p) = (2 pi a_s(k), 6 pi a_p^3(k)) in atomic units."""
    tan_s, tan_p = phase_shifts(species.phase_shifts, k)
    c_s = -2.0 * math.pi * tan_s / k
    c_p = -6.0 * math.pi * tan_p / k**3
    return c_s, c_p


def interaction_matrix(evaluator: BasisEvaluator, points, k: float):
    """Pseudopotential matrix summed over perturber positions (atomic units)."""
    species = evaluator.basis.states[0].species
    c_s, c_p = scattering_prefactors(species, k)
    n = len(evaluator.basis.states)
    h = np.zeros((n, n), dtype=complex)
    for point in points:
        psi, grad = evaluator.components_at(point)
        h += c_s * np.einsum("as,bs->ab", psi.conj(), psi)
        h += c_p * np.einsum("ask,bsk->ab", grad.conj(), grad)
    return h


def pseudopotential_element(a: RydbergState, b: RydbergState, point, species: SpeciesData = None, grid_spec=GridSpec()):
    """Single matrix element <a|V|b> at one perturber position (hartree)."""
    species = species or a.species
    basis = Basis(states=(a, b) if a != b else (a,), description="pair")
    ev = BasisEvaluator(basis, grid_spec)
    k = semiclassical_k(point[0], a.n_star)
    h = interaction_matrix(ev, [point], k)
    return h[0, -1]


@dataclass(frozen=True)
class PECCurve:
    """Eigenvalues along a perturber path with the target branch tracked.

    path rows are (R, theta, phi) in atomic units / radians; eigenvalues are
    relative to the unperturbed center-state asymptote, in hartree.
    """

    path: np.ndarray
    eigenvalues: np.ndarray  # (n_points, n_states)
    tracked_branch: np.ndarray  # (n_points,) int
    meta: dict = field(default_factory=dict)

    @property
    def tracked_energy(self):
        return self.eigenvalues[np.arange(len(self.tracked_branch)), self.tracked_branch]

    @property
    def tracked_energy_2pi_mhz(self):
        return self.tracked_energy * HARTREE_TO_2PI_MHZ

    def branch_energy_at(self, r_au):
        """Tracked-branch energy interpolated at radius r_au (same ray only)."""
        rs = self.path[:, 0]
        order = np.argsort(rs)
        rs_sorted = rs[order]
        if r_au < rs_sorted[0] or r_au > rs_sorted[-1]:
            raise ValueError(f"R={r_au} outside the computed path; extrapolation refused")
        return float(np.interp(r_au, rs_sorted, self.tracked_energy[order]))


def pec_curve(center: RydbergState, path, basis: Basis, grid_spec=GridSpec(), collect_vectors=False) -> PECCurve:
    """Dense Hermitian diagonalization along the path with branch tracking.

    The path must be sorted by R ascending; tracking starts from the
    outermost point, where the center state is unmixed, and follows maximal
    eigenvector overlap inward. Near-degenerate overlaps are recorded in
    meta["ambiguities"].
    """
    path = np.asarray(path, dtype=float)
    if path.ndim != 2 or path.shape[1] != 3:
        raise ValueError("path must be an (n, 3) array of (R, theta, phi)")
    if np.any(np.diff(path[:, 0]) < 0):
        raise ValueError("path must be sorted by R ascending")

    ev = BasisEvaluator(basis, grid_spec)
    states = basis.states
    n = len(states)
    center_idx = states.index(center)
    e0 = np.array([st.energy for st in states])
    diag = e0 - center.energy
    n_star = center.n_star

    n_pts = path.shape[0]
    eigenvalues = np.zeros((n_pts, n))
    branch = np.zeros(n_pts, dtype=int)
    ambiguities = []
    vectors = [None] * n_pts

    v_prev = None
    for idx in range(n_pts - 1, -1, -1):
        point = path[idx]
        k = semiclassical_k(point[0], n_star)
        h = interaction_matrix(ev, [point], k)
        h += np.diag(diag)
        herm_defect = np.max(np.abs(h - h.conj().T))
        vals, vecs = np.linalg.eigh(h)
        eigenvalues[idx] = vals
        ref = np.zeros(n, dtype=complex)
        if v_prev is None:
            ref[center_idx] = 1.0
        else:
            ref = v_prev
        overlaps = np.abs(vecs.conj().T @ ref) ** 2
        top = np.argsort(overlaps)[::-1]
        if len(top) > 1 and overlaps[top[0]] - overlaps[top[1]] < OVERLAP_TIE_THRESHOLD:
            ambiguities.append(
                {"point_index": int(idx), "branches": [int(top[0]), int(top[1])],
                 "overlaps": [float(overlaps[top[0]]), float(overlaps[top[1]])]}
            )
        branch[idx] = int(top[0])
        v_prev = vecs[:, top[0]]
        if collect_vectors:
            vectors[idx] = vecs[:, top[0]]

    if ambiguities:
        warnings.warn(f"branch tracking met {len(ambiguities)} near-degenerate overlaps", stacklevel=2)
    meta = {
        "basis_size": n,
        "basis": basis.description,
        "ambiguities": ambiguities,
        "hermiticity_defect": float(herm_defect),
    }
    curve = PECCurve(path=path, eigenvalues=eigenvalues, tracked_branch=branch, meta=meta)
    if collect_vectors:
        meta["tracked_vectors"] = vectors
    return curve


# ---------------------------------------------------------------------------
# plaquette geometry and per-site shifts


@dataclass(frozen=True)
class TrapModel:
    """Harmonic description of the optical traps holding the plaquette atoms.

    Depths in 2pi x MHz, ground-state widths in nm per lab axis (x, y, z).
    spin_potentials records the lattice-weight decomposition per qubit state;
    the weights of each state must sum to 1.
    """

    depth_xy: float
    depth_z: float
    ground_state_widths: tuple
    spin_potentials: dict = field(default_factory=lambda: {"0": {"plus": 0.25, "minus": 0.75}, "1": {"plus": 1.0}})

    def __post_init__(self):
        if any(w <= 0 for w in self.ground_state_widths):
            raise ValueError("ground-state widths must be positive")
        for state, weights in self.spin_potentials.items():
            total = sum(weights.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"spin potential weights for |{state}> sum to {total}, not 1")


@dataclass(frozen=True)
class PlaquetteGeometry:
    """Perturber-site layout around the central atom.

    Qubit-|0> sites sit in the lattice plane of the central atom at distance
    in_plane_constant (where the m = j Rydberg torus lives); qubit-|1> sites
    are displaced by z_shift out of plane, which both lengthens the distance
    and moves them off the torus, suppressing their overlap.
    """

    encoding: str
    in_plane_constant: float  # nm
    z_shift: float  # nm
    trap: TrapModel

    def __post_init__(self):
        if self.encoding not in ("four_qubit", "six_qubit"):
            raise ValueError(f"unknown encoding {self.encoding}")
        if abs(self.z_shift) >= self.in_plane_constant:
            raise ValueError("require |z_shift| < in_plane_constant")

    @property
    def n_sites(self):
        return 4 if self.encoding == "four_qubit" else 6

    def site_position(self, index: int, qubit_state: int):
        """(r_nm, theta, phi) of one site for the given qubit state."""
        if not 0 <= index < self.n_sites:
            raise ValueError(f"site index {index} out of range")
        phi = 2.0 * math.pi * index / self.n_sites
        rho = self.in_plane_constant
        z = 0.0 if qubit_state == 0 else self.z_shift
        r = math.hypot(rho, z)
        theta = math.atan2(rho, z)
        return (r, theta, phi)

    def site_positions(self, qubit_state: int):
        return [self.site_position(i, qubit_state) for i in range(self.n_sites)]


_GH_NODES = (-math.sqrt(1.5), 0.0, math.sqrt(1.5))
_GH_WEIGHTS = (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0)


def site_shift(
    geometry: PlaquetteGeometry,
    center: RydbergState,
    qubit_state: int,
    mode: str = "point",
    basis: Basis = None,
    grid_spec=GridSpec(),
    site_index: int = 0,
    n_track: int = 9,
):
    """Level shift V_RF at one displaced lattice site, in 2pi x MHz.

    point mode evaluates the tracked branch at the site; gaussian_averaged
    integrates it over the trap ground-state density with 3-point
    Gauss-Hermite quadrature per axis. Negative values = attractive curve.
    """
    if mode not in ("point", "gaussian_averaged"):
        raise ValueError(f"unknown mode {mode}")
    if basis is None:
        basis = build_basis(center, BasisSpec(manifolds=((center.n, center.l, center.j),)))
    r_nm, theta, phi = geometry.site_position(site_index, qubit_state)
    curve = _track_to_point(center, basis, (r_nm * NM_TO_BOHR, theta, phi), grid_spec, n_track)
    v_point = curve.tracked_energy[0] * HARTREE_TO_2PI_MHZ
    if mode == "point":
        return float(v_point)

    v_site = curve.meta["tracked_vectors"][0]
    widths = geometry.trap.ground_state_widths
    site_xyz = _sph_to_xyz(r_nm, theta, phi)
    ev = BasisEvaluator(basis, grid_spec)
    states = basis.states
    diag = np.array([st.energy for st in states]) - center.energy
    total = 0.0
    for ix, wx in zip(_GH_NODES, _GH_WEIGHTS):
        for iy, wy in zip(_GH_NODES, _GH_WEIGHTS):
            for iz, wz in zip(_GH_NODES, _GH_WEIGHTS):
                xyz = site_xyz + np.array([ix * widths[0], iy * widths[1], iz * widths[2]])
                r, th, ph = _xyz_to_sph(xyz)
                k = semiclassical_k(r * NM_TO_BOHR, center.n_star)
                h = interaction_matrix(ev, [(r * NM_TO_BOHR, th, ph)], k) + np.diag(diag)
                vals, vecs = np.linalg.eigh(h)
                j = int(np.argmax(np.abs(vecs.conj().T @ v_site) ** 2))
                total += wx * wy * wz * vals[j]
    return float(total * HARTREE_TO_2PI_MHZ)


def site_curvature(
    geometry: PlaquetteGeometry,
    center: RydbergState,
    qubit_state: int,
    basis: Basis = None,
    grid_spec=GridSpec(),
    step_nm: float = 2.0,
):
    """d^2 V / dz^2 of the tracked branch at a site, in 2pi x MHz / nm^2."""
    if basis is None:
        basis = build_basis(center, BasisSpec(manifolds=((center.n, center.l, center.j),)))
    r_nm, theta, phi = geometry.site_position(0, qubit_state)
    base = _sph_to_xyz(r_nm, theta, phi)
    vals = []
    for dz in (-step_nm, 0.0, step_nm):
        xyz = base + np.array([0.0, 0.0, dz])
        r, th, ph = _xyz_to_sph(xyz)
        curve = _track_to_point(center, basis, (r * NM_TO_BOHR, th, ph), grid_spec, 9)
        vals.append(curve.tracked_energy[0] * HARTREE_TO_2PI_MHZ)
    return (vals[0] - 2.0 * vals[1] + vals[2]) / step_nm**2


def _track_to_point(center, basis, point_au, grid_spec, n_track):
    r_site = point_au[0]
    r_far = 4.0 * center.n_star**2
    rs = np.geomspace(r_site, max(r_far, 1.2 * r_site), n_track)
    path = np.array([[r, point_au[1], point_au[2]] for r in rs])
    return pec_curve(center, path, basis, grid_spec, collect_vectors=True)


def _sph_to_xyz(r, theta, phi):
    return np.array(
        [r * math.sin(theta) * math.cos(phi), r * math.sin(theta) * math.sin(phi), r * math.cos(theta)]
    )


def _xyz_to_sph(xyz):
    r = float(np.linalg.norm(xyz))
    theta = math.acos(max(-1.0, min(1.0, xyz[2] / r)))
    phi = math.atan2(xyz[1], xyz[0])
    return r, theta, phi


def superposition_site_shift(center: RydbergState, components, point_au, grid_spec=GridSpec()):
    """First-order shift of an orbital superposition sum_i c_i Y_l^{m_i}.

    components is a sequence of (m_l, coefficient) sharing the center's
    radial part, e.g. the hexagonal-plaquette angular state
    (Y_2^2 + Y_2^-1)/sqrt(2). Returns the diagonal estimate in 2pi x MHz;
    conditioning logic only needs this level of the shift.
    """
    r, theta, phi = point_au
    radial = radial_solve(RydbergState(center.n, center.l, center.j, center.j, center.species), grid_spec)
    psi = 0.0 + 0.0j
    grad = np.zeros(3, dtype=complex)
    l = center.l
    r_val = radial.R_at(r)
    dr_val = radial.dR_at(r)
    for m, c in components:
        y = spherical_harmonic(l, m, theta, phi)
        psi += c * r_val * y
        grad[0] += c * dr_val * y
        grad[1] += c * (r_val / r) * _theta_derivative(l, m, theta, phi)
        if m != 0:
            grad[2] += c * 1j * m * r_val * y / (r * math.sin(theta))
    k = semiclassical_k(r, center.n_star)
    c_s, c_p = scattering_prefactors(center.species, k)
    v = c_s * abs(psi) ** 2 + c_p * float(np.sum(np.abs(grad) ** 2))
    return v * HARTREE_TO_2PI_MHZ


# ---------------------------------------------------------------------------
# cache


def cache_key(species: SpeciesData, basis: Basis, grid_spec: GridSpec, path) -> str:
    payload = {
        "species": _species_fingerprint(species),
        "basis": basis.description,
        "states": [(s.n, s.l, s.j, s.m) for s in basis.states],
        "grid": grid_spec.key(),
        "path": np.asarray(path, dtype=float).tolist(),
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _species_fingerprint(species: SpeciesData):
    psm = species.phase_shifts
    return {
        "name": species.name,
        "ry": species.rydberg_constant,
        "defects": {f"{l}:{tj}": list(c) for (l, tj), c in sorted(species.quantum_defects.items())},
        "phase": [psm.a_s, psm.alpha, psm.p_resonance_e, psm.p_strength, psm.tan_max, list(psm.s_table), list(psm.p_table)],
    }


def cache_store(cache_dir, key: str, curve: PECCurve):
    """Atomic-replace write; concurrent writers end last-complete-wins."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    target = cache_dir / f"{key}.npz"
    meta = {k: v for k, v in curve.meta.items() if k != "tracked_vectors"}
    fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(
                fh,
                path=curve.path,
                eigenvalues=curve.eigenvalues,
                tracked_branch=curve.tracked_branch,
                meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
            )
        os.replace(tmp, target)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return target


def cache_load(cache_dir, key: str):
    """Returns the cached PECCurve or None on miss."""
    target = Path(cache_dir) / f"{key}.npz"
    if not target.exists():
        return None
    with np.load(target) as data:
        meta = json.loads(bytes(data["meta"].tobytes()).decode())
        return PECCurve(
            path=data["path"],
            eigenvalues=data["eigenvalues"],
            tracked_branch=data["tracked_branch"],
            meta=meta,
        )
