import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wigner2e.core import (BoundarySupportWarning, GaussianPacket,
                           UnitSystem, ValidationError, WignerGrid,
                           check_boundary_support, make_gaussian_state,
                           marginal, mean_momentum, mean_position, moment,
                           tensor_product)


def test_momentum_mesh_spacing(grid32):
    assert grid32.dp == pytest.approx(np.pi / grid32.coherence_length)
    # half-integer placement: no zero-momentum point, symmetric mesh
    assert 0.0 not in grid32.p_centers
    np.testing.assert_allclose(grid32.p_centers + grid32.p_centers[::-1],
                               0.0, atol=1e-14)
    np.testing.assert_allclose(np.diff(grid32.p_centers), grid32.dp)


def test_transfer_lattice_is_integer_multiples(grid32):
    q = grid32.transfer_lattice()
    np.testing.assert_allclose(q / grid32.dp, np.round(q / grid32.dp),
                               atol=1e-12)
    assert len(q) == grid32.n_p


@given(n=st.sampled_from([8, 16, 32, 64]),
       lc=st.floats(min_value=2.0, max_value=20.0))
@settings(max_examples=20, deadline=None)
def test_momentum_mesh_properties(n, lc):
    g = WignerGrid(d=1, n_x=n, x_min=-5.0, x_max=5.0,
                   coherence_length=lc, n_p=n)
    assert g.dp * g.coherence_length == pytest.approx(np.pi * g.hbar)
    np.testing.assert_allclose(
        g.p_centers, (np.arange(n) + 0.5 - n / 2) * g.dp)


def test_grid_validation():
    with pytest.raises(ValidationError):
        WignerGrid(d=3, n_x=8, x_min=-1, x_max=1, coherence_length=1, n_p=8)
    with pytest.raises(ValidationError):
        WignerGrid(d=1, n_x=8, x_min=-1, x_max=1, coherence_length=1, n_p=7)
    with pytest.raises(ValidationError):
        WignerGrid(d=1, n_x=8, x_min=1, x_max=-1, coherence_length=1, n_p=8)


def test_unit_system_validation():
    with pytest.raises(ValidationError):
        UnitSystem(coupling_lambda=-1.0)


def test_gaussian_state_normalized_and_centered(grid32):
    pk = GaussianPacket(center_r=(-2.0,), center_p=(1.0,), sigma=(0.8,))
    f = make_gaussian_state(pk, grid32)
    assert f.integral() == pytest.approx(1.0, abs=1e-12)
    assert moment(f, (1, 0)) == pytest.approx(-2.0, abs=1e-6)
    assert moment(f, (0, 1)) == pytest.approx(1.0, abs=1e-6)


def test_tensor_product_and_marginals(grid32, approach_packets):
    pk1, pk2 = approach_packets
    f1 = make_gaussian_state(pk1, grid32)
    f2 = make_gaussian_state(pk2, grid32)
    f = tensor_product(f1, f2)
    assert f.arity == "two"
    assert f.integral() == pytest.approx(1.0, abs=1e-12)
    m1 = marginal(f, 1)
    m2 = marginal(f, 2)
    np.testing.assert_allclose(m1.values, f1.values, atol=1e-14)
    np.testing.assert_allclose(m2.values, f2.values, atol=1e-14)
    assert mean_position(f, 1) == pytest.approx(-3.0, abs=1e-6)
    assert mean_momentum(f, 2) == pytest.approx(-1.0, abs=1e-6)


def test_marginal_requires_pair_state(grid32, approach_packets):
    f1 = make_gaussian_state(approach_packets[0], grid32)
    with pytest.raises(ValidationError):
        marginal(f1, 1)
    f = tensor_product(f1, f1)
    with pytest.raises(ValidationError):
        marginal(f, 3)


def test_boundary_support_warning(grid32):
    pk = GaussianPacket(center_r=(-5.5,), center_p=(0.0,), sigma=(0.8,))
    f = make_gaussian_state(pk, grid32)
    with pytest.warns(BoundarySupportWarning):
        check_boundary_support(f, tol=1e-8)


def test_packet_density_matches_grid_sampling(grid32):
    pk = GaussianPacket(center_r=(0.5,), center_p=(-0.3,), sigma=(0.9,))
    f = make_gaussian_state(pk, grid32)
    dens = pk.density((grid32.x_centers[:, None],),
                      (grid32.p_centers[None, :],))
    # make_gaussian_state renormalizes; shapes must agree up to one scale
    ratio = f.values / dens
    assert np.ptp(ratio[dens > dens.max() * 1e-6]) < 1e-8
