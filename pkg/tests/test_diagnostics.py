import numpy as np
import pytest

from wigner2e.core import (GaussianPacket, ValidationError, WignerGrid,
                           WignerState, make_gaussian_state, tensor_product)
from wigner2e.diagnostics import (ObservableSeries, model_distance, purity,
                                  reduced_purity, separability_metric,
                                  weyl_oracle_gaussian)


def test_gaussian_state_is_pure(grid32):
    pk = GaussianPacket(center_r=(0.5,), center_p=(-0.4,), sigma=(0.9,))
    f = make_gaussian_state(pk, grid32)
    assert purity(f) == pytest.approx(1.0, abs=1e-6)


def test_even_mixture_has_half_purity(grid32):
    # equal mixture of two well-separated pure packets: Tr(rho^2) = 1/2
    pk_a = GaussianPacket(center_r=(-3.0,), center_p=(1.0,), sigma=(0.8,))
    pk_b = GaussianPacket(center_r=(3.0,), center_p=(-1.0,), sigma=(0.8,))
    fa = make_gaussian_state(pk_a, grid32)
    fb = make_gaussian_state(pk_b, grid32)
    mix = fa.with_values(0.5 * (fa.values + fb.values))
    assert purity(mix) == pytest.approx(0.5, abs=1e-6)


def test_purity_requires_normalization(grid32):
    pk = GaussianPacket(center_r=(0.0,), center_p=(0.0,), sigma=(0.9,))
    f = make_gaussian_state(pk, grid32)
    bad = f.with_values(2.0 * f.values)
    with pytest.raises(ValidationError):
        purity(bad)
    scaled = f.with_values(0.5 * f.values)
    assert purity(scaled, check_norm=False) == pytest.approx(0.25, abs=1e-6)


def test_purity_clips_discretization_overshoot(grid32):
    pk = GaussianPacket(center_r=(0.0,), center_p=(0.0,), sigma=(0.9,))
    f = make_gaussian_state(pk, grid32)
    inflated = f.with_values(1.001 * f.values)
    with pytest.warns(UserWarning, match="clipped"):
        assert purity(inflated, check_norm=False) == 1.0


def test_product_state_is_separable_and_marginals_pure(grid32,
                                                       approach_packets):
    pk1, pk2 = approach_packets
    f = tensor_product(make_gaussian_state(pk1, grid32),
                       make_gaussian_state(pk2, grid32))
    assert separability_metric(f) < 1e-12
    assert reduced_purity(f, 1) == pytest.approx(1.0, abs=1e-9)
    assert reduced_purity(f, 2) == pytest.approx(1.0, abs=1e-9)


def test_separability_detects_correlation(grid32, approach_packets):
    pk1, pk2 = approach_packets
    fa = tensor_product(make_gaussian_state(pk1, grid32),
                        make_gaussian_state(pk2, grid32))
    fb = tensor_product(make_gaussian_state(pk2, grid32),
                        make_gaussian_state(pk1, grid32))
    corr = fa.with_values(0.5 * (fa.values + fb.values))
    assert separability_metric(corr) > 0.1
    with pytest.raises(ValidationError):
        separability_metric(make_gaussian_state(pk1, grid32))


@pytest.mark.parametrize("x0,p0,sigma,tol", [
    # the quadrature truncates the relative coordinate at the coherence
    # length; broad packets hit that truncation floor (~exp(-L^2/8 sigma^2))
    (0.0, 0.0, 0.6, 1e-8), (1.5, -0.7, 0.6, 1e-8),
    (-1.0, 0.4, 0.65, 1e-8), (0.5, -0.4, 0.9, 1e-5), (-2.0, 1.2, 1.1, 1e-4)])
def test_weyl_oracle_matches_closed_form(grid32, x0, p0, sigma, tol):
    pk = GaussianPacket(center_r=(x0,), center_p=(p0,), sigma=(sigma,))
    f = make_gaussian_state(pk, grid32)
    oracle = weyl_oracle_gaussian(pk, grid32)
    assert np.max(np.abs(f.values - oracle.values)) < tol
    assert purity(oracle, check_norm=False) == pytest.approx(1.0, abs=1e-4)


def test_model_distance_norms(grid32):
    pk = GaussianPacket(center_r=(0.0,), center_p=(0.0,), sigma=(0.9,))
    f = make_gaussian_state(pk, grid32)
    g = f.with_values(f.values + 1.0 / (16.0 * 2.0 * np.pi))
    vol = grid32.cell_volume * grid32.n_x * grid32.n_p
    expect = 1.0 / (16.0 * 2.0 * np.pi)
    assert model_distance(f, g, "L2") == pytest.approx(
        expect * np.sqrt(vol), rel=1e-12)
    assert model_distance(f, g, "L1") == pytest.approx(
        expect * vol, rel=1e-12)
    with pytest.raises(ValidationError):
        model_distance(f, g, "L3")
    other = WignerGrid(d=1, n_x=16, x_min=-8.0, x_max=8.0,
                       coherence_length=8.0, n_p=16)
    with pytest.raises(ValidationError):
        model_distance(f, make_gaussian_state(pk, other))


def test_series_header_order_and_roundtrip(tmp_path):
    s = ObservableSeries()
    s.append(t=0.0, mean_x=1.0, norm=1.0)
    s.append(t=0.1, mean_x=0.9, norm=1.0)
    assert s.header()[:2] == ["t", "norm"]
    assert s.header()[-1] == "mean_x"
    path = tmp_path / "series.csv"
    s.to_csv(path)
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert list(data.dtype.names) == s.header()
    np.testing.assert_allclose(data["mean_x"], [1.0, 0.9])
