import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ellipsorb.materials import (HC_EV_NM, BackgroundMedium, ConstantMaterial,
                                 DrudeMaterial, SILVER, VACUUM, WavelengthGrid,
                                 drude_permittivity, photon_energy_ev, wavenumbers)


def test_high_frequency_limit():
    # omega -> infinity: eps -> 1
    assert drude_permittivity(SILVER, 1e-6) == pytest.approx(1.0, abs=1e-8)


def test_silver_at_plasma_wavelength():
    # omega = omega_p exactly: eps = (tau^2 + i tau wp) / (wp^2 + tau^2)
    lam = HC_EV_NM / SILVER.plasma_frequency
    expected = 3.975150272843859e-05 + 0.006304753963991729j
    assert drude_permittivity(SILVER, lam) == pytest.approx(expected, rel=1e-9)


def test_lossless_dipole_resonance():
    # tau = 0 at omega = wp/sqrt(2): eps = -1
    lossless = DrudeMaterial(plasma_frequency=7.613, damping=0.0)
    lam = HC_EV_NM * np.sqrt(2.0) / lossless.plasma_frequency
    assert drude_permittivity(lossless, lam) == pytest.approx(-1.0, abs=1e-12)


@given(st.floats(min_value=1.0, max_value=1e4))
@settings(max_examples=50, deadline=None)
def test_passivity(lam):
    assert drude_permittivity(SILVER, lam).imag >= 0.0


def test_continuity_in_wavelength():
    lams = np.linspace(50.0, 2000.0, 4001)
    eps = drude_permittivity(SILVER, lams)
    assert np.all(np.isfinite(eps))
    assert np.max(np.abs(np.diff(eps))) < 0.5


def test_rejects_nonpositive_wavelength():
    with pytest.raises(ValueError):
        drude_permittivity(SILVER, 0.0)
    with pytest.raises(ValueError):
        photon_energy_ev(-5.0)


def test_vacuum_wavenumber():
    k_m, _ = wavenumbers(500.0, VACUUM, SILVER)
    assert k_m == pytest.approx(2.0 * np.pi / 500.0, rel=1e-15)


def test_branch_for_negative_permittivity():
    k_m, k_c = wavenumbers(400.0, VACUUM, ConstantMaterial(-4.0))
    assert k_c.real == pytest.approx(0.0, abs=1e-18)
    assert k_c.imag == pytest.approx(2.0 * 2.0 * np.pi / 400.0, rel=1e-12)


def test_silver_wavenumber_cross_check():
    _, k_c = wavenumbers(400.0, VACUUM, SILVER)
    eps = drude_permittivity(SILVER, 400.0)
    ref = 2.0 * np.pi / 400.0 * np.sqrt(complex(eps))
    if ref.imag < 0:
        ref = -ref
    assert k_c == pytest.approx(ref, rel=1e-14)
    assert k_c.imag >= 0.0


@given(st.floats(min_value=100.0, max_value=2000.0))
@settings(max_examples=50, deadline=None)
def test_radiation_branch(lam):
    _, k_c = wavenumbers(lam, VACUUM, SILVER)
    assert k_c.imag >= 0.0


def test_material_validation():
    with pytest.raises(ValueError):
        DrudeMaterial(plasma_frequency=-1.0, damping=0.1)
    with pytest.raises(ValueError):
        DrudeMaterial(plasma_frequency=1.0, damping=-0.1)
    with pytest.raises(ValueError):
        BackgroundMedium(rel_permittivity=0.0)


def test_wavelength_grid():
    grid = WavelengthGrid(150.0, 550.0, 5)
    assert grid.nodes[0] == 150.0 and grid.nodes[-1] == 550.0
    assert np.allclose(np.diff(grid.nodes), 100.0)
    with pytest.raises(ValueError):
        WavelengthGrid(550.0, 150.0, 5)
    with pytest.raises(ValueError):
        WavelengthGrid(-1.0, 150.0, 5)
