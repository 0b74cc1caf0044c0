"""Species data: quantum defects, scattering phase shifts, decay rates.

Everything numeric is data, loaded from a JSON config and validated here;
the code never hardcodes a defect or a phase-shift parameter. Energies are
atomic units internally; decay rates are carried as 2pi x MHz values.
"""

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .constants import HARTREE_TO_2PI_MHZ


class SpeciesLoadError(ValueError):
    """Raised when a species config is missing, malformed or inconsistent."""


@dataclass(frozen=True)
class PhaseShiftModel:
    """Triplet s- and p-wave phase shifts of the slow quasi-free electron.

    s-wave: low-energy expansion tan d_s(k) = -k * (a_s + (pi/3) * alpha * k),
    the momentum-dependent scattering length of a polarizable perturber.
    p-wave: single-pole shape-resonance form
    tan d_p(k) = 0.5 * b * k^3 / (e_res - k^2 / 2), which keeps the correct
    k^3 threshold law and diverges at the resonance energy; evaluations clamp
    |tan d_p| at tan_max there. All parameters in atomic units. Either channel
    may instead carry a (k, tan d) table, interpolated linearly.
    """

    a_s: float = 0.0
    alpha: float = 0.0
    p_resonance_e: float = 0.0
    p_strength: float = 0.0
    tan_max: float = 50.0
    s_table: tuple = ()
    p_table: tuple = ()

    def tan_s(self, k):
        if self.s_table:
            ks, vs = _table_arrays(self.s_table)
            return _interp_clamped(k, ks, vs)
        return -k * (self.a_s + (math.pi / 3.0) * self.alpha * k)

    def tan_p(self, k):
        if self.p_table:
            ks, vs = _table_arrays(self.p_table)
            raw = _interp_clamped(k, ks, vs)
        else:
            denom = self.p_resonance_e - 0.5 * k * k
            if denom == 0.0:
                return math.copysign(self.tan_max, self.p_strength)
            raw = 0.5 * self.p_strength * k**3 / denom
        return max(-self.tan_max, min(self.tan_max, raw))


def _table_arrays(table):
    ks = [row[0] for row in table]
    vs = [row[1] for row in table]
    return ks, vs


def _interp_clamped(k, ks, vs):
    if k <= ks[0]:
        return vs[0]
    if k >= ks[-1]:
        return vs[-1]
    for i in range(1, len(ks)):
        if k <= ks[i]:
            f = (k - ks[i - 1]) / (ks[i] - ks[i - 1])
            return vs[i - 1] + f * (vs[i] - vs[i - 1])
    return vs[-1]


@dataclass(frozen=True)
class SpeciesData:
    """Validated single-species dataset.

    quantum_defects maps (l, j) to modified Rydberg-Ritz coefficients
    [d0, d2, d4, d6, d8]; levels absent from the table are hydrogenic.
    """

    name: str
    rydberg_constant: float  # hartree
    mass_amu: float
    quantum_defects: dict = field(default_factory=dict)  # (l, 2j) -> tuple
    phase_shifts: PhaseShiftModel = field(default_factory=PhaseShiftModel)
    decay_rates: dict = field(default_factory=dict)  # level label -> 2pi MHz

    def defect_coefficients(self, l, j):
        return self.quantum_defects.get((l, int(round(2 * j))), (0.0, 0.0, 0.0, 0.0, 0.0))


_REQUIRED_KEYS = {"name", "rydberg_constant_au", "mass_amu", "quantum_defects", "phase_shift_model", "decay_rates"}
_OPTIONAL_KEYS = {"units", "sources", "comment"}


def load_species(path) -> SpeciesData:
    """Load and validate a species config file.

    Accepts a filesystem path or the name of a bundled config ("cs133").
    Rejects unknown keys, missing fields, and defect tables whose leading
    coefficients fail to decrease with l.
    """
    raw = _read_config(path)
    unknown = set(raw) - _REQUIRED_KEYS - _OPTIONAL_KEYS
    if unknown:
        raise SpeciesLoadError(f"unknown keys in species config: {sorted(unknown)}")
    missing = _REQUIRED_KEYS - set(raw)
    if missing:
        raise SpeciesLoadError(f"species config missing keys: {sorted(missing)}")

    ry = float(raw["rydberg_constant_au"])
    if ry <= 0:
        raise SpeciesLoadError(f"rydberg_constant_au must be positive, got {ry}")
    mass = float(raw["mass_amu"])
    if mass <= 0:
        raise SpeciesLoadError("mass_amu must be positive")

    defects = {}
    for key, coeffs in raw["quantum_defects"].items():
        l, two_j = _parse_lj(key)
        if len(coeffs) > 5:
            raise SpeciesLoadError(f"defect series for {key} longer than 5 coefficients")
        if coeffs and coeffs[0] < 0:
            raise SpeciesLoadError(f"leading quantum defect for {key} is negative")
        defects[(l, two_j)] = tuple(float(c) for c in coeffs) + (0.0,) * (5 - len(coeffs))
    _check_defects_decreasing(defects)

    psm = _parse_phase_shifts(raw["phase_shift_model"])
    decay = {str(k): float(v) for k, v in raw["decay_rates"].items()}
    for label, rate in decay.items():
        if rate < 0:
            raise SpeciesLoadError(f"decay rate for {label} is negative")

    return SpeciesData(
        name=str(raw["name"]),
        rydberg_constant=ry,
        mass_amu=mass,
        quantum_defects=defects,
        phase_shifts=psm,
        decay_rates=decay,
    )


def _read_config(path):
    p = Path(path)
    if p.suffix == "" and not p.exists():
        ref = resources.files("rydfermi").joinpath(f"data/species/{path}.json")
        if not ref.is_file():
            raise SpeciesLoadError(f"no bundled species named {path!r} and no such file")
        return json.loads(ref.read_text())
    if not p.exists():
        raise SpeciesLoadError(f"species config not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SpeciesLoadError(f"species config {p} is not valid JSON: {exc}") from exc


def _parse_lj(key):
    try:
        l_str, j_str = key.split(":")
        l = int(l_str)
        two_j = int(round(2 * float(j_str)))
    except ValueError as exc:
        raise SpeciesLoadError(f"defect key {key!r} not of the form 'l:j'") from exc
    if l < 0 or two_j not in (2 * l - 1, 2 * l + 1) and not (l == 0 and two_j == 1):
        raise SpeciesLoadError(f"defect key {key!r} has inconsistent (l, j)")
    return l, two_j


def _check_defects_decreasing(defects):
    by_l = {}
    for (l, _), coeffs in defects.items():
        by_l.setdefault(l, []).append(coeffs[0])
    ls = sorted(by_l)
    for a, b in zip(ls, ls[1:]):
        if max(by_l[b]) >= max(by_l[a]):
            raise SpeciesLoadError(f"quantum defects not decreasing from l={a} to l={b}")


def _parse_phase_shifts(cfg):
    known = {"s_wave", "p_wave", "tan_max"}
    unknown = set(cfg) - known
    if unknown:
        raise SpeciesLoadError(f"unknown phase_shift_model keys: {sorted(unknown)}")
    tan_max = float(cfg.get("tan_max", 50.0))
    if tan_max <= 0:
        raise SpeciesLoadError("tan_max must be positive")
    kw = {"tan_max": tan_max}
    s_cfg = cfg.get("s_wave", {})
    if s_cfg.get("type", "low_energy") == "table":
        kw["s_table"] = tuple((float(k), float(v)) for k, v in s_cfg["values"])
    else:
        kw["a_s"] = float(s_cfg.get("scattering_length_au", 0.0))
        kw["alpha"] = float(s_cfg.get("polarizability_au", 0.0))
    p_cfg = cfg.get("p_wave", {})
    if p_cfg.get("type", "resonance") == "table":
        kw["p_table"] = tuple((float(k), float(v)) for k, v in p_cfg["values"])
    else:
        kw["p_resonance_e"] = float(p_cfg.get("resonance_energy_au", 0.0))
        kw["p_strength"] = float(p_cfg.get("strength_au", 0.0))
    return PhaseShiftModel(**kw)


def effective_principal(species: SpeciesData, n: int, l: int, j: float) -> float:
    """n* = n - d(n, l, j) via the modified Rydberg-Ritz expansion."""
    if l >= n:
        raise ValueError(f"require l < n, got n={n}, l={l}")
    if l < 0:
        raise ValueError("l must be non-negative")
    c = species.defect_coefficients(l, j)
    d0 = c[0]
    if d0 == 0.0 and not any(c):
        return float(n)
    x = (n - d0) ** 2
    defect = d0 + c[1] / x + c[2] / x**2 + c[3] / x**3 + c[4] / x**4
    n_star = n - defect
    if n_star <= 0:
        raise ValueError(f"effective principal number non-positive for n={n}, l={l}, j={j}")
    return n_star


def level_energy(species: SpeciesData, n: int, l: int, j: float) -> float:
    """Bound-level energy -Ry / n*^2 in hartree."""
    n_star = effective_principal(species, n, l, j)
    return -species.rydberg_constant / n_star**2


def level_energy_2pi_mhz(species: SpeciesData, n: int, l: int, j: float) -> float:
    return level_energy(species, n, l, j) * HARTREE_TO_2PI_MHZ


def phase_shifts(model: PhaseShiftModel, k: float):
    """(tan d_s, tan d_p) at electron momentum k > 0 (atomic units)."""
    if k <= 0:
        raise ValueError(f"momentum must be positive, got {k}")
    return model.tan_s(k), model.tan_p(k)
