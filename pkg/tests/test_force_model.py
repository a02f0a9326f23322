import numpy as np
import pytest

from wigner2e.core import (GaussianPacket, UnitSystem, ValidationError,
                           WignerGrid)
from wigner2e.force_model import (EnsembleConfig, evaluate_fw,
                                  forward_ensemble, separability_certificate,
                                  _cic_deposit, _packet_density)
from wigner2e.trajectories import FieldConfig, coulomb_force, integrate_2e

UNITS0 = UnitSystem(coupling_lambda=0.0)
UNITS1 = UnitSystem(coupling_lambda=1.0)
EPS = 0.5

PK1 = GaussianPacket(center_r=(-3.0,), center_p=(1.0,), sigma=(0.7,))
PK2 = GaussianPacket(center_r=(3.0,), center_p=(-1.0,), sigma=(0.7,))


def probe_points(n=6, seed=3):
    rng = np.random.default_rng(seed)
    r1 = PK1.center_r + rng.normal(scale=0.5, size=(n, 1))
    p1 = PK1.center_p + rng.normal(scale=0.5, size=(n, 1))
    r2 = PK2.center_r + rng.normal(scale=0.5, size=(n, 1))
    p2 = PK2.center_p + rng.normal(scale=0.5, size=(n, 1))
    return r1, p1, r2, p2


def test_evaluate_at_t0_is_exact_product():
    pt = probe_points()
    vals = evaluate_fw(pt, 0.0, PK1, PK2, UNITS1, EPS)
    ref = (_packet_density(PK1, pt[0], pt[1], 1.0)
           * _packet_density(PK2, pt[2], pt[3], 1.0))
    np.testing.assert_array_equal(vals, ref)


def test_decoupled_evaluation_is_free_translation():
    pt = probe_points()
    t = 1.3
    vals = evaluate_fw(pt, t, PK1, PK2, UNITS0, EPS, h=5e-2)
    shifted = ((pt[0] - pt[1] * t, pt[1], pt[2] - pt[3] * t, pt[3]))
    ref = evaluate_fw(shifted, 0.0, PK1, PK2, UNITS0, EPS)
    np.testing.assert_allclose(vals, ref, rtol=1e-9)


def test_backward_matches_forward_trajectory():
    # push initial points forward, then evaluate there: must recover the
    # initial product values up to the integrator's reversibility error
    pt0 = probe_points()
    t = 0.8
    fwd = integrate_2e(pt0, 0.0, t, UNITS1, EPS, h=1e-3, record=False)
    vals = evaluate_fw(fwd, t, PK1, PK2, UNITS1, EPS, h=1e-3)
    ref = evaluate_fw(pt0, 0.0, PK1, PK2, UNITS1, EPS)
    np.testing.assert_allclose(vals, ref, rtol=1e-6)


def first_order_reference(pt, dt):
    r1, p1, r2, p2 = pt
    f12, f21 = coulomb_force(r1, r2, UNITS1, EPS)
    shifted = (r1 - p1 * dt, p1 - f12 * dt, r2 - p2 * dt, p2 - f21 * dt)
    return evaluate_fw(shifted, 0.0, PK1, PK2, UNITS1, EPS)


def test_short_time_first_order_form():
    # the first-order pullback approximation has O(dt^2) residual
    pt = probe_points()
    errs = []
    for dt in (2e-2, 1e-2):
        vals = evaluate_fw(pt, dt, PK1, PK2, UNITS1, EPS, h=dt / 64)
        errs.append(np.max(np.abs(vals - first_order_reference(pt, dt))))
    ratio = errs[0] / errs[1]
    assert 3.3 <= ratio <= 4.7


@pytest.fixture(scope="module")
def grid_est():
    return WignerGrid(d=1, n_x=32, x_min=-8.0, x_max=8.0,
                      coherence_length=8.0, n_p=32)


def test_ensemble_reproducible_and_normalized(grid_est):
    ec = EnsembleConfig(grid=grid_est, n_particles=20_000, seed=11,
                        n_batches=4, h=1e-2)
    out = [forward_ensemble(PK1, PK2, 0.5, ec, UNITS1, EPS, record_count=3)
           for _ in range(2)]
    (s_a, ser_a, rep_a), (s_b, ser_b, rep_b) = out
    np.testing.assert_array_equal(s_a.values, s_b.values)
    assert rep_a["purity1"] == rep_b["purity1"]
    assert rep_a["mean_x1"] == rep_b["mean_x1"]
    # CIC deposit conserves the sample weight exactly
    assert rep_a["total_weight"] == pytest.approx(1.0, abs=1e-12)
    assert abs(s_a.integral() - 1.0) < 1e-12


def test_control_variate_purity_exact_when_decoupled(grid_est):
    ec = EnsembleConfig(grid=grid_est, n_particles=20_000, seed=2,
                        n_batches=4, h=1e-2)
    _, series, report = forward_ensemble(PK1, PK2, 1.0, ec, UNITS0, EPS,
                                         record_count=3)
    assert report["purity1"] == 1.0
    assert report["purity2"] == 1.0
    np.testing.assert_array_equal(series.get("norm"), 1.0)


def test_coupling_degrades_purity(grid_est):
    ec = EnsembleConfig(grid=grid_est, n_particles=60_000, seed=2,
                        n_batches=4, h=5e-3)
    _, _, report = forward_ensemble(PK1, PK2, 2.0, ec, UNITS1, EPS,
                                    record_count=3)
    assert report["purity1"] < 1.0 - 0.01
    assert report["purity2"] < 1.0 - 0.01


def test_certificate_decoupled_is_exactly_separable():
    rep = separability_certificate(PK1, PK2, 1.0, UNITS0, EPS, n_probes=10)
    assert rep.residual_true <= 1e-10
    assert rep.residual_control <= 1e-10
    assert "separability" in rep.summary().lower() or rep.summary()


def test_certificate_coupled_fails_separability():
    rep = separability_certificate(PK1, PK2, 1.0, UNITS1, EPS, n_probes=10)
    assert rep.residual_control <= 1e-8
    assert rep.residual_true >= 10.0 * max(rep.residual_control, 1e-300)
    assert rep.ratio >= 10.0


def test_cic_deposit_conserves_weight():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.0, 8.0, size=(500, 2))
    counts = _cic_deposit((8, 8), pts)
    assert counts.sum() == pytest.approx(500.0, abs=1e-9)
    assert counts.min() >= 0.0


def test_ensemble_config_validation(grid_est):
    with pytest.raises(ValidationError):
        EnsembleConfig(grid=grid_est, n_particles=0)
    with pytest.raises(ValidationError):
        EnsembleConfig(grid=grid_est, n_particles=10, n_batches=1)
