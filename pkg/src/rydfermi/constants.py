"""Physical constants and the unit conventions used across the package.

Atomic units (hartree, bohr, m_e = hbar = 1) inside the structure modules
(atomic_data, wavefunctions, pec); frequencies cross module boundaries as
plain MHz numbers with the understanding that omega = 2*pi*value ("2pi x MHz").
Dynamics modules work in angular rad/us with times in us.
"""

import numpy as np

# E_h / h expressed in MHz: multiply an energy in hartree by this to get the
# "2pi x MHz" frequency used at module boundaries. CODATA 2018.
HARTREE_TO_2PI_MHZ = 6.579683920502e9

BOHR_RADIUS_NM = 0.0529177210903
NM_TO_BOHR = 1.0 / BOHR_RADIUS_NM

# one unified atomic mass unit in electron masses, CODATA 2018
AMU_TO_ME = 1822.888486209

# hbar in SI, for trap-frequency conversions (J * s)
HBAR_SI = 1.054571817e-34
AMU_SI = 1.66053906660e-27

TWO_PI = 2.0 * np.pi


def mhz_to_rad_per_us(value_2pi_mhz):
    """Angular frequency in rad/us for a quantity quoted as 2pi x MHz."""
    return TWO_PI * value_2pi_mhz


def hartree_to_2pi_mhz(energy_au):
    return energy_au * HARTREE_TO_2PI_MHZ


def nm_to_au(length_nm):
    return length_nm * NM_TO_BOHR


def au_to_nm(length_au):
    return length_au * BOHR_RADIUS_NM
