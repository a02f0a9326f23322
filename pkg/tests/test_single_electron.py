import numpy as np
import pytest

from wigner2e.core import (CostGuardError, GaussianPacket, ValidationError,
                           WignerGrid, make_gaussian_state, moment)
from wigner2e.diagnostics import model_distance
from wigner2e.potentials import PotentialSpec, wigner_kernel_1e
from wigner2e.single_electron import (SolverConfig1e, evolve_1e,
                                      neumann_solve_1e, step_1e)
from wigner2e.trajectories import FieldConfig


def harmonic_grid():
    # dp = 0.2 so the sigma = 1/sqrt(2) packet spans > 3 cells per axis
    return WignerGrid(d=1, n_x=64, x_min=-6.0, x_max=6.0,
                      coherence_length=np.pi / 0.2, n_p=64)


def test_config_validation():
    with pytest.raises(ValidationError):
        SolverConfig1e(dt=0.0)
    with pytest.raises(ValidationError):
        SolverConfig1e(splitting="rk4")
    with pytest.raises(ValidationError):
        SolverConfig1e(interpolation="sinc")


def test_free_streaming_is_exact(grid32):
    pk = GaussianPacket(center_r=(-2.0,), center_p=(1.0,), sigma=(0.8,))
    f0 = make_gaussian_state(pk, grid32)
    sc = SolverConfig1e(dt=1e-2)
    series, f = evolve_1e(f0, 1.0, FieldConfig(), sc)
    x = grid32.x_centers[:, None]
    p = grid32.p_centers[None, :]
    expect = pk.density((x - p * 1.0,), (np.broadcast_to(p, f.values.shape),))
    expect = expect / (expect.sum() * grid32.cell_volume)
    np.testing.assert_allclose(f.values, expect, atol=1e-6, rtol=0)
    assert abs(f.integral() - 1.0) < 1e-12


def test_harmonic_first_moments_one_period():
    g = harmonic_grid()
    pk = GaussianPacket(center_r=(1.0,), center_p=(0.0,),
                        sigma=(2.0 ** -0.5,))
    f0 = make_gaussian_state(pk, g)
    cfg = FieldConfig(external=PotentialSpec(kind="quadratic", k=1.0))
    sc = SolverConfig1e(dt=1e-3)
    series, f = evolve_1e(f0, 2.0 * np.pi, cfg, sc, record_every=400)
    assert np.max(np.abs(series.get("norm") - 1.0)) < 1e-12
    assert moment(f, (1, 0)) == pytest.approx(1.0, abs=1e-3)
    assert moment(f, (0, 1)) == pytest.approx(0.0, abs=1e-3)
    # phase check at an interior record against the analytic rotation
    t = series.get("t")
    np.testing.assert_allclose(series.get("mean_x"), np.cos(t), atol=1e-3)


def test_lie_splitting_runs_and_conserves_norm():
    g = harmonic_grid()
    pk = GaussianPacket(center_r=(1.0,), center_p=(0.0,),
                        sigma=(2.0 ** -0.5,))
    f = make_gaussian_state(pk, g)
    cfg = FieldConfig(external=PotentialSpec(kind="quadratic", k=1.0))
    sc = SolverConfig1e(dt=1e-2, splitting="lie")
    f = step_1e(f, cfg, None, sc)
    _, f = evolve_1e(f, 0.1, cfg, sc)
    assert abs(f.integral() - 1.0) < 1e-12


def test_interpolation_fallbacks_conserve_mass():
    g = harmonic_grid()
    pk = GaussianPacket(center_r=(0.5,), center_p=(0.0,),
                        sigma=(2.0 ** -0.5,))
    for interp in ("linear", "cubic"):
        sc = SolverConfig1e(dt=1e-2, interpolation=interp)
        _, f = evolve_1e(make_gaussian_state(pk, g), 0.2,
                         FieldConfig(), sc)
        assert abs(f.integral() - 1.0) < 1e-8


def test_neumann_cost_guard():
    g = WignerGrid(d=1, n_x=128, x_min=-8, x_max=8,
                   coherence_length=8.0, n_p=64)
    pk = GaussianPacket(center_r=(0.0,), center_p=(0.0,), sigma=(1.0,))
    f0 = make_gaussian_state(pk, g)
    with pytest.raises(CostGuardError):
        neumann_solve_1e(f0, 0.1, 2)


def test_neumann_matches_grid_solver(grid32):
    pk = GaussianPacket(center_r=(-1.0,), center_p=(0.5,), sigma=(0.9,))
    f0 = make_gaussian_state(pk, grid32)
    spec = PotentialSpec(kind="coulomb3d", softening=1.0)
    kernel = wigner_kernel_1e(spec, grid32, coupling=0.5)
    cfg = FieldConfig(external=spec)
    sc = SolverConfig1e(dt=1e-3)
    approx = neumann_solve_1e(f0, 0.1, 2, cfg, kernel, sc)
    _, ref = evolve_1e(f0, 0.1, cfg, sc, kernel=kernel)
    rel = model_distance(approx, ref) / np.sqrt(np.sum(ref.values ** 2))
    assert rel < 1e-2


def test_neumann_order_zero_is_free_pullback(grid32):
    pk = GaussianPacket(center_r=(0.0,), center_p=(1.0,), sigma=(0.9,))
    f0 = make_gaussian_state(pk, grid32)
    spec = PotentialSpec(kind="quadratic", k=1.0)
    kernel = wigner_kernel_1e(spec, grid32)
    out = neumann_solve_1e(f0, 0.05, 0, FieldConfig(external=spec), kernel)
    _, free = evolve_1e(f0, 0.05, FieldConfig(), SolverConfig1e(dt=1e-3))
    np.testing.assert_allclose(out.values, free.values, atol=1e-10)
