import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wigner2e.core import (GaussianPacket, UnitSystem, ValidationError,
                           WignerGrid, WignerState, make_gaussian_state)
from wigner2e.potentials import (PotentialSpec, apply_kernel,
                                 combine_kernels, coulomb_kernel_2e,
                                 coulomb_kernel_entry, exact_symbol_1e,
                                 reduced_kernel, wigner_kernel_1e)


def small_grid(n=8):
    return WignerGrid(d=1, n_x=n, x_min=-4.0, x_max=4.0,
                      coherence_length=4.0, n_p=n)


def test_potential_spec_validation():
    with pytest.raises(ValidationError):
        PotentialSpec(kind="bogus")
    with pytest.raises(ValidationError):
        PotentialSpec(kind="coulomb3d", softening=0.0)
    with pytest.raises(ValidationError):
        PotentialSpec(kind="tabulated", samples=None)


def test_kernel_rows_sum_to_zero(grid32):
    spec = PotentialSpec(kind="coulomb3d", softening=0.8)
    k = wigner_kernel_1e(spec, grid32)
    # zero net momentum transfer per position: the kernel moves probability
    # between momenta without creating mass
    np.testing.assert_allclose(k.values.sum(axis=-1), 0.0, atol=1e-12)


def test_kernel_antisymmetric_in_transfer(grid32):
    spec = PotentialSpec(kind="quadratic", k=1.0)
    k = wigner_kernel_1e(spec, grid32)
    n = grid32.n_p
    idx = (-np.arange(n)) % n
    np.testing.assert_allclose(k.values, -k.values[:, idx], atol=1e-12)


@given(vals=st.lists(st.floats(min_value=-2.0, max_value=2.0),
                     min_size=9, max_size=9))
@settings(max_examples=15, deadline=None)
def test_tabulated_kernel_antisymmetry_property(vals):
    g = small_grid()
    xs = tuple(np.linspace(-6.0, 6.0, 9))
    spec = PotentialSpec(kind="tabulated", samples=(xs, tuple(vals)))
    k = wigner_kernel_1e(spec, g)
    idx = (-np.arange(g.n_p)) % g.n_p
    np.testing.assert_allclose(k.values, -k.values[:, idx], atol=1e-10)
    np.testing.assert_allclose(k.values.sum(axis=-1), 0.0, atol=1e-10)


def test_apply_kernel_matches_bruteforce_convolution():
    g = small_grid()
    spec = PotentialSpec(kind="quadratic", k=0.7)
    kern = wigner_kernel_1e(spec, g)
    pk = GaussianPacket(center_r=(0.5,), center_p=(-0.4,), sigma=(0.9,))
    f = make_gaussian_state(pk, g)
    out = apply_kernel(kern, f)
    # independent nested-loop circular convolution over momentum
    expect = np.zeros_like(f.values)
    for i in range(g.n_x):
        for k in range(g.n_p):
            acc = 0.0
            for m in range(g.n_p):
                acc += kern.values[i, m] * f.values[i, (k - m) % g.n_p]
            expect[i, k] = acc
    np.testing.assert_allclose(out.values, expect, atol=1e-12)


def test_exact_symbol_is_conservative_phase(grid32):
    spec = PotentialSpec(kind="quadratic", k=1.0)
    sym = exact_symbol_1e(spec, grid32)
    assert np.allclose(sym.real, 0.0, atol=1e-14)     # purely imaginary
    assert np.allclose(sym[:, 0], 0.0, atol=1e-14)    # zero mean mode
    assert np.allclose(sym[:, grid32.n_p // 2], 0.0)  # Nyquist zeroed
    phase = np.exp(1e-3 * sym)
    np.testing.assert_allclose(np.abs(phase), 1.0, atol=1e-14)


def test_pair_kernel_momentum_transfer_structure():
    g = small_grid()
    units = UnitSystem(coupling_lambda=1.0)
    spec = PotentialSpec(kind="coulomb3d", softening=0.5)
    stored = coulomb_kernel_2e(units, spec, g)
    peak = np.max(np.abs(stored.values))
    half = g.n_p // 2
    for m1 in range(-half, half):
        for m2 in (-m1 - 1, -m1 + 1, -m1 + 2):
            if not -half <= m2 < half:
                continue
            off = coulomb_kernel_entry(units, spec, g, 1.5, m1, m2)
            assert abs(off) <= 1e-10 * peak


def test_reduced_kernel_normalization_guard(grid32):
    pk = GaussianPacket(center_r=(1.0,), center_p=(0.0,), sigma=(0.8,))
    f = make_gaussian_state(pk, grid32)
    spec = PotentialSpec(kind="coulomb3d", softening=0.5)
    bad = f.with_values(2.0 * f.values)
    with pytest.raises(ValidationError):
        reduced_kernel(bad, spec, grid32, 1.0)
    k = reduced_kernel(bad, spec, grid32, 1.0, allow_unnormalized=True)
    assert k.values.shape == (grid32.n_x, grid32.n_p)


def test_combine_kernels_sums_values_and_symbols(grid32):
    ka = wigner_kernel_1e(PotentialSpec(kind="quadratic", k=1.0), grid32)
    kb = wigner_kernel_1e(PotentialSpec(kind="linear", alpha=0.5), grid32)
    kc = combine_kernels(ka, kb, None)
    np.testing.assert_allclose(kc.values, ka.values + kb.values)
    np.testing.assert_allclose(kc.symbol, ka.symbol + kb.symbol)


def test_combine_kernels_rejects_mismatched_grids(grid32, grid16):
    ka = wigner_kernel_1e(PotentialSpec(kind="quadratic", k=1.0), grid32)
    kb = wigner_kernel_1e(PotentialSpec(kind="quadratic", k=1.0), grid16)
    with pytest.raises(ValidationError):
        combine_kernels(ka, kb)
