import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plasmonls import (ConstantDielectric, DrudeLorentz, EmptyMediumError, MediumModel, Oscillator,
                       PhysicalConstants, TabulatedDielectric, ValidationError, coupling_alpha, epsilon_imag,
                       voxelize)
from plasmonls.exceptions import DomainError


def mp_eps_imag(terms, nu):
    """Imaginary part of the Drude-Lorentz permittivity evaluated in complex arithmetic."""
    mpmath.mp.dps = 30
    eps = mpmath.mpf(1)
    for wp, gamma, w0 in terms:
        eps += mpmath.mpf(wp) ** 2 / (mpmath.mpf(w0) ** 2 - mpmath.mpf(nu) ** 2 - 1j * gamma * mpmath.mpf(nu))
    return float(mpmath.im(eps))


@pytest.mark.parametrize("terms", [[(1.0, 0.3, 0.0)], [(1.3, 0.1, 0.0), (0.7, 0.05, 1.4)], [(2.0, 1.0, 0.5)]])
@pytest.mark.parametrize("nu", [0.05, 0.7, 1.4, 3.0])
def test_drude_lorentz_matches_complex_permittivity(terms, nu):
    model = DrudeLorentz(tuple(Oscillator(*t) for t in terms))
    assert epsilon_imag(model, nu) == pytest.approx(mp_eps_imag(terms, nu), rel=1e-13)


def test_alpha_matches_definition(drude):
    consts = PhysicalConstants.si()
    m = MediumModel([[0.0, 0.0, 0.0]], 1e-8, drude, consts)
    mpmath.mp.dps = 30
    for nu in (0.2, 1.0, 2.5):
        expected = mpmath.sqrt(2 * mpmath.mpf(consts.eps0) * nu * mp_eps_imag([(1.0, 0.3, 0.0)], nu) / mpmath.pi)
        assert coupling_alpha(m, [0.0, 0.0, 0.0], nu) == pytest.approx(float(expected), rel=1e-13)
    assert coupling_alpha(m, [1.0, 0.0, 0.0], 1.0) == 0.0


def test_alpha_table_rescaled_drops_eps0(drude):
    consts = PhysicalConstants.si()
    m = MediumModel([[0.0, 0.0, 0.0]], 1.0, drude, consts)
    nu = np.array([0.5, 1.5])
    ratio = m.alpha_table(nu) / m.alpha_table(nu, rescaled=True)
    np.testing.assert_allclose(ratio, math.sqrt(consts.eps0), rtol=1e-14)
    np.testing.assert_allclose(m.alpha_table(nu, scale=0.25), 0.25 * m.alpha_table(nu), rtol=1e-15)


def test_alpha_rejects_nonpositive_frequency(one_voxel):
    with pytest.raises(DomainError):
        coupling_alpha(one_voxel, [0.3, 0, 0], 0.0)
    with pytest.raises(DomainError):
        epsilon_imag(one_voxel.dielectric, -1.0)


def test_constant_and_tabulated_models():
    c = ConstantDielectric(0.4, 0.5, 2.0)
    np.testing.assert_array_equal(c(np.array([0.1, 0.5, 1.0, 2.0, 2.1])), [0, 0.4, 0.4, 0.4, 0])
    t = TabulatedDielectric((1.0, 2.0, 4.0), (0.0, 1.0, 3.0))
    np.testing.assert_allclose(t(np.array([0.5, 1.5, 3.0, 5.0])), [0.0, 0.5, 2.0, 0.0])
    with pytest.raises(ValidationError):
        TabulatedDielectric((1.0, 1.0), (0.1, 0.2))
    with pytest.raises(ValidationError):
        ConstantDielectric(-0.1)


def test_constants_consistency():
    si = PhysicalConstants.si()
    assert si.eps0 * si.mu0 * si.c**2 == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValidationError):
        PhysicalConstants(eps0=1.0, mu0=2.0, c=1.0, hbar=1.0)


def test_medium_validation(drude):
    with pytest.raises(ValidationError):
        MediumModel([[0, 0, 0], [0.1, 0, 0]], 0.3, drude)
    with pytest.raises(EmptyMediumError):
        MediumModel(np.zeros((0, 3)), 0.3, drude)
    with pytest.raises(ValidationError):
        MediumModel([[0, 0, 0]], 0.3, (drude, drude))
    m = MediumModel([[0, 0, 0], [0.3, 0, 0]], 0.3, (drude, ConstantDielectric(0.2)))
    table = m.eps_i_table([1.0])
    assert table[0, 1] == 0.2 and table[0, 0] == pytest.approx(epsilon_imag(drude, 1.0))


def test_strict_positivity(drude):
    m = MediumModel([[0, 0, 0]], 0.3, ConstantDielectric(0.5, 1.0, 2.0), strict_positivity=True)
    m.check_positivity([1.5])
    with pytest.raises(ValidationError):
        m.check_positivity([0.5, 1.5])


def brute_force_count(kind, dims, h, center=(0.0, 0.0, 0.0)):
    """Count lattice centers (i + 1/2) h inside the shape by enumerating a large block."""
    i = (np.arange(-40, 40) + 0.5) * h
    x, y, z = np.meshgrid(i - center[0], i - center[1], i - center[2], indexing="ij")
    tol = 1e-12 * h
    if kind == "sphere":
        return int(np.count_nonzero(x**2 + y**2 + z**2 <= dims**2 + tol))
    inside = np.ones_like(x, dtype=bool)
    for v, d in zip((x, y, z), dims):
        inside &= (v >= -d / 2 - tol) & (v < d / 2 - tol)
    return int(np.count_nonzero(inside))


@pytest.mark.parametrize("shape,dims,h", [
    ("box", (0.3, 0.3, 0.3), 0.3), ("box", (0.6, 0.6, 0.6), 0.3), ("box", (0.9, 0.9, 0.9), 0.3),
    ("box", (1.0, 0.55, 0.7), 0.25), ("sphere", 0.5, 0.2), ("sphere", 1.0, 0.3),
])
def test_voxelize_matches_brute_force(drude, shape, dims, h):
    spec = {"kind": shape, ("radius" if shape == "sphere" else "size"): dims}
    m = voxelize(spec, h, drude)
    assert m.n_voxels == brute_force_count(shape, dims, h)


def test_cube_voxel_counts(drude):
    counts = [voxelize({"kind": "box", "size": (s, s, s)}, 0.3, drude).n_voxels for s in (0.3, 0.6, 0.9, 1.2)]
    assert counts == [1, 8, 27, 64]


def test_slab_and_errors(drude):
    m = voxelize({"kind": "slab", "thickness": 0.4, "lateral": (1.2, 0.8)}, 0.2, drude)
    assert m.n_voxels == 6 * 4 * 2
    with pytest.raises(EmptyMediumError):
        voxelize({"kind": "box", "size": (0.1, 1, 1)}, 0.3, drude)
    with pytest.raises(ValidationError):
        voxelize({"kind": "torus"}, 0.3, drude)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 1.5), st.floats(0.1, 0.4))
def test_voxel_volume_approximates_sphere(radius, h):
    # the voxelized volume is a Riemann sum of the indicator; its error is bounded by the shell of width h
    m = voxelize({"kind": "sphere", "radius": max(radius, h)}, h, DrudeLorentz.drude(1.0, 0.1))
    r = max(radius, h)
    reach = math.sqrt(3) / 2 * h
    lo = 4 / 3 * math.pi * max(r - reach, 0.0) ** 3
    hi = 4 / 3 * math.pi * (r + reach) ** 3
    assert lo - 1e-12 <= m.volume <= hi + 1e-12


def test_locate(two_voxels):
    idx = two_voxels.locate([[0.0, 0.0, 0.0], [0.3, 0.1, -0.1], [1.0, 0.0, 0.0], [0.15, 0.0, 0.0]])
    assert idx[0] == 0 and idx[1] == 1 and idx[2] == -1 and idx[3] in (0, 1)
