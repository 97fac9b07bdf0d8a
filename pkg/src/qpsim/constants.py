"""Physical defaults for the simulated apparatus.

Every constant the simulator uses lives here so that the CLI can override
them from one place. Times are in picoseconds, lengths in nanometres.
"""

import math

#: Speed of light in nm/ps.
SPEED_OF_LIGHT_NM_PER_PS = 299_792.458

#: Down-converted photon wavelength.
WAVELENGTH_NM = 795.0

#: Interference-filter bandwidth (FWHM).
BANDWIDTH_NM = 6.0

#: Default photon-number capacity of a state.
N_MAX = 4

#: First-order diffraction efficiency of the analysis holograms.
HOLOGRAM_EFFICIENCY = 0.10

#: Measured q-plate conversion efficiency and transmittance.
QPLATE_ETA = 0.85
QPLATE_TRANSMITTANCE = 0.90

#: Seed used by the CLI when none is given.
DEFAULT_SEED = 2009

#: Amplitudes smaller than this are dropped after canonicalization.
PRUNE_TOL = 1e-14

#: Environment variable naming the default CLI output directory.
OUTPUT_ENV = "QPSIM_OUT"


def coherence_time(wavelength_nm=WAVELENGTH_NM, bandwidth_nm=BANDWIDTH_NM):
    """Coherence time ``lambda**2 / (c * dlambda)`` in ps."""
    if wavelength_nm <= 0 or bandwidth_nm <= 0:
        raise ValueError("wavelength and bandwidth must be positive")
    return wavelength_nm**2 / (SPEED_OF_LIGHT_NM_PER_PS * bandwidth_nm)


#: Coherence time of the filtered photons (about 0.351 ps).
TAU_C_PS = coherence_time()

#: Quarter-wave plate orientations used by the transferrers (degrees).
TRANSFER_QWP_IN_DEG = 45.0
TRANSFER_QWP_OUT_DEG = -45.0

#: OAM reference-frame rotation that aligns the transferrer output with
#: alpha|+2> + beta|-2> under our wave-plate convention (radians).
OAM_FRAME_ANGLE = math.pi / 8
