"""Material dispersion and wavelength/frequency conversions.

All lengths are in nanometers and all photon energies in electronvolts
throughout the package; the logarithmic Laplace kernel is scale dependent,
so a single consistent unit system is mandatory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Photon-energy conversion constant, eV*nm (CODATA-derived).
HC_EV_NM = 1239.84193


@dataclass(frozen=True)
class DrudeMaterial:
    """Drude-model metal: eps(w) = 1 - wp^2 / (w (w + i tau)), w in eV.

    Parameters
    ----------
    plasma_frequency : float
        Plasma frequency wp in eV.  Must be positive.
    damping : float
        Damping rate tau in eV.  Must be non-negative.
    """

    plasma_frequency: float
    damping: float

    def __post_init__(self):
        if not self.plasma_frequency > 0:
            raise ValueError(f"plasma_frequency must be > 0, got {self.plasma_frequency}")
        if self.damping < 0:
            raise ValueError(f"damping must be >= 0, got {self.damping}")

    def permittivity(self, lam):
        """Relative permittivity at vacuum wavelength ``lam`` (nm)."""
        return drude_permittivity(self, lam)


@dataclass(frozen=True)
class ConstantMaterial:
    """Non-dispersive particle material, mainly for null and sanity tests."""

    rel_permittivity: complex

    def permittivity(self, lam):
        lam = np.asarray(lam, dtype=float)
        _check_positive_wavelength(lam)
        return np.broadcast_to(np.asarray(self.rel_permittivity, dtype=complex), lam.shape)[()]


@dataclass(frozen=True)
class BackgroundMedium:
    """Homogeneous non-dispersive surrounding medium (and particle permeability).

    ``rel_permeability_particle`` is the particle's (constant) relative
    permeability, stored here because it is a material constant of the same
    kind as the background parameters.
    """

    rel_permittivity: float = 1.0
    rel_permeability: float = 1.0
    rel_permeability_particle: float = 1.0

    def __post_init__(self):
        if not self.rel_permittivity > 0:
            raise ValueError("background rel_permittivity must be > 0")
        if not self.rel_permeability > 0:
            raise ValueError("background rel_permeability must be > 0")
        if not self.rel_permeability_particle > 0:
            raise ValueError("particle rel_permeability must be > 0")


# Silver parameters used throughout the experiments.
SILVER = DrudeMaterial(plasma_frequency=7.613, damping=0.048)
VACUUM = BackgroundMedium()


@dataclass(frozen=True)
class WavelengthGrid:
    """Uniform, endpoint-inclusive wavelength grid (nm)."""

    lambda_min: float
    lambda_max: float
    count: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0 < self.lambda_min < self.lambda_max):
            raise ValueError(
                f"need 0 < lambda_min < lambda_max, got [{self.lambda_min}, {self.lambda_max}]"
            )
        if self.count < 2:
            raise ValueError(f"count must be >= 2, got {self.count}")
        nodes = np.linspace(self.lambda_min, self.lambda_max, self.count)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)


def photon_energy_ev(lam):
    """Photon energy (eV) of vacuum wavelength ``lam`` (nm)."""
    lam = np.asarray(lam, dtype=float)
    _check_positive_wavelength(lam)
    return HC_EV_NM / lam


def drude_permittivity(material: DrudeMaterial, lam):
    """Drude relative permittivity 1 - wp^2/(w(w + i tau)) at wavelength ``lam`` (nm).

    The imaginary part is >= 0 for tau > 0 (passivity).
    """
    w = photon_energy_ev(lam)
    wp = material.plasma_frequency
    tau = material.damping
    return 1.0 - wp**2 / (w * (w + 1j * tau))


def wavenumbers(lam, medium: BackgroundMedium, material):
    """Background and particle wavenumbers (1/nm) at wavelength ``lam`` (nm).

    Returns ``(k_m, k_c)`` with ``k_m = k0 sqrt(eps_m mu_m)`` real for a
    lossless background and ``k_c = k0 sqrt(eps_c mu_c)`` on the branch with
    ``Im(k_c) >= 0`` (radiation-compatible).
    """
    lam = np.asarray(lam, dtype=float)
    _check_positive_wavelength(lam)
    k0 = 2.0 * np.pi / lam
    k_m = k0 * np.sqrt(medium.rel_permittivity * medium.rel_permeability)
    eps_c = material.permittivity(lam)
    k_c = k0 * np.sqrt(np.asarray(eps_c, dtype=complex) * medium.rel_permeability_particle)
    k_c = np.where(k_c.imag < 0.0, -k_c, k_c)[()]
    return k_m[()] if np.ndim(k_m) == 0 else k_m, k_c


def _check_positive_wavelength(lam):
    if np.any(np.asarray(lam) <= 0):
        raise ValueError("wavelength must be positive (nm)")
