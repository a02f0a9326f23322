"""Semi-discrete Wigner-potential kernels.

A kernel K(r, q) is the truncated Fourier transform (over the relative
coordinate s, |s| <= L_c) of the odd potential difference
V(r + s/2) - V(r - s/2).  It is real, odd in the momentum transfer q, and
acts on a state by circular convolution over the momentum mesh:

    (K * f)(r, p_k) = sum_m K(r, q_m) f(r, p_{k-m})      (indices mod n_p)

The circular form keeps the operator's phase-space integral exactly zero
(the kernel sums to zero over one momentum period), which is what makes
normalization conservation a machine-precision statement instead of a
quadrature accident.  The momentum sum carries no dp factor: with the
1/(2 L_c) prefactor below, the plain sum is the consistent semi-discrete
limit of the continuum convolution (the linear-potential kernel applied to
a state reproduces the classical force term, which pins the convention).

Because the kernel is odd and real, its DFT along the transfer axis is
purely imaginary, so exp(dt * K) is a pure phase in momentum-Fourier
space; solvers use that for an exact, mass- and L2-conserving substep.

The two-electron Coulomb kernel depends on (s1 - s2) only.  Truncating in
center/relative coordinates (S = (s1+s2)/2, sigma = s1-s2, each limited to
[-L_c, L_c]) makes the S-integral an exact Kronecker delta on q1 + q2, so
the interaction conserves total momentum by construction and the kernel is
stored on the q1 + q2 = 0 diagonal with an (r1 - r2) dependence only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CostGuardError, ValidationError, WignerGrid, WignerState

_KERNEL_CACHE: dict = {}
_BUILDER_CACHE: dict = {}


@dataclass(frozen=True)
class PotentialSpec:
    """External or pair potential.

    kinds: none | linear (alpha * x) | quadratic (k/2 * x^2) |
           tabulated (samples) | coulomb2d | coulomb3d.
    Coulomb kinds are softened, |r| -> sqrt(|r|^2 + softening^2); the 2d
    form is the (repulsive-by-convention) log potential, the 3d form is
    1/r and doubles as the d=1 soft-Coulomb pair potential.
    ``center`` shifts the argument of the radial kinds so a Coulomb well
    can be placed anywhere (used by the point-charge oracle).
    """

    kind: str = "none"
    alpha: float = 0.0
    k: float = 0.0
    samples: tuple | None = None  # ((x0, x1, ...), (v0, v1, ...))
    softening: float = 0.0
    center: float = 0.0

    def __post_init__(self):
        kinds = ("none", "linear", "quadratic", "tabulated",
                 "coulomb2d", "coulomb3d")
        if self.kind not in kinds:
            raise ValidationError(f"unknown potential kind {self.kind!r}")
        if self.kind in ("coulomb2d", "coulomb3d") and self.softening <= 0:
            raise ValidationError(
                "coulomb potentials need softening > 0 (pole regularization)")
        if self.kind == "tabulated":
            if self.samples is None or len(self.samples) != 2:
                raise ValidationError("tabulated potential needs (xs, vs)")
            xs, vs = self.samples
            if len(xs) != len(vs) or len(xs) < 2:
                raise ValidationError("tabulated samples malformed")
            object.__setattr__(self, "samples",
                               (tuple(float(x) for x in xs),
                                tuple(float(v) for v in vs)))

    def is_coulomb(self) -> bool:
        return self.kind in ("coulomb2d", "coulomb3d")

    def evaluate(self, x, coupling: float = 1.0):
        """V at scalar or array positions (1d argument; radial for coulomb)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "none":
            return np.zeros_like(x)
        if self.kind == "linear":
            return self.alpha * x
        if self.kind == "quadratic":
            return 0.5 * self.k * x * x
        if self.kind == "tabulated":
            xs, vs = self.samples
            if np.any(x < xs[0]) or np.any(x > xs[-1]):
                raise ValidationError(
                    "tabulated potential does not cover the required support")
            return np.interp(x, xs, vs)
        r2 = (x - self.center) ** 2 + self.softening ** 2
        if self.kind == "coulomb3d":
            return coupling / np.sqrt(r2)
        # coulomb2d: repulsive branch of the log potential (see trajectories)
        return -0.5 * coupling * np.log(r2)

    def evaluate_radial2(self, r2, coupling: float = 1.0):
        """V as a function of squared distance (for d=2 pair use)."""
        r2 = np.asarray(r2, dtype=float) + self.softening ** 2
        if self.kind == "coulomb3d":
            return coupling / np.sqrt(r2)
        if self.kind == "coulomb2d":
            return -0.5 * coupling * np.log(r2)
        raise ValidationError("radial evaluation is for coulomb kinds")


def pair_potential_for(grid_d: int, softening: float) -> PotentialSpec:
    """Default pair-potential kind for a given spatial dimension."""
    kind = "coulomb2d" if grid_d == 2 else "coulomb3d"
    return PotentialSpec(kind=kind, softening=softening)


@dataclass(frozen=True)
class PotentialKernel:
    """Precomputed kernel; layout selects how apply_kernel interprets values.

    one_electron      values[x..., m]        m = wrapped momentum transfer
    two_electron_diag values[delta, m]       delta = i1 - i2 + n_x - 1

    ``symbol`` optionally carries the closed-form momentum-DFT symbol of the
    periodized kernel (exact for analytic potentials); propagators prefer it
    over the DFT of the stored rows, which carries an O(1/n_p) truncation
    tail from the slowly decaying transfer weights.
    """

    grid: WignerGrid
    layout: str
    values: np.ndarray
    symbol: np.ndarray | None = None

    def transfer_fft(self) -> np.ndarray:
        """DFT along the wrapped-transfer axis (purely imaginary)."""
        return np.fft.fft(np.fft.ifftshift(self.values, axes=-1), axis=-1)

    def propagation_symbol(self) -> np.ndarray:
        """Best available momentum-DFT symbol for exponential substeps."""
        if self.symbol is not None:
            return self.symbol
        return np.fft.fft(self.values, axis=-1)


def _s_nodes(grid: WignerGrid, oversample: int = 8):
    n_s = oversample * grid.n_p
    L = grid.coherence_length
    ds = 2.0 * L / n_s
    s = -L + (np.arange(n_s) + 0.5) * ds
    return s, ds


def _sine_table(grid: WignerGrid, s: np.ndarray) -> np.ndarray:
    """sin(s * q_m / hbar) for signed transfers m = -n_p/2 .. n_p/2 - 1."""
    q = grid.transfer_lattice()
    return np.sin(np.outer(q, s) / grid.hbar)


def _wrap_transfers(k_signed: np.ndarray) -> np.ndarray:
    """Map values on signed transfers to wrapped (fftshift) index order.

    The unpaired Nyquist transfer (m = -n_p/2) is zeroed so the kernel is
    exactly odd on the periodic lattice.
    """
    k = np.array(k_signed, dtype=float)
    k[..., 0] = 0.0
    return np.fft.fftshift(k, axes=-1)


def _delta_v(spec: PotentialSpec, coupling: float,
             r: np.ndarray, s: np.ndarray) -> np.ndarray:
    """V(r + s/2) - V(r - s/2) on the outer product of r and s."""
    plus = spec.evaluate(r[:, None] + 0.5 * s[None, :], coupling)
    minus = spec.evaluate(r[:, None] - 0.5 * s[None, :], coupling)
    return plus - minus


def _kernel_rows(spec: PotentialSpec, grid: WignerGrid, r: np.ndarray,
                 coupling: float = 1.0) -> np.ndarray:
    """Signed-transfer kernel rows K(r_i, q_m) by midpoint quadrature."""
    s, ds = _s_nodes(grid)
    sines = _sine_table(grid, s)                      # (n_p, n_s)
    dv = _delta_v(spec, coupling, r, s)               # (n_r, n_s)
    pref = -ds / (grid.hbar * 2.0 * grid.coherence_length)
    return pref * dv @ sines.T                        # (n_r, n_p)


def wigner_kernel_1e(spec: PotentialSpec, grid: WignerGrid,
                     coupling: float = 1.0) -> PotentialKernel:
    """Single-electron kernel of an external potential."""
    key = ("1e", spec, grid, coupling)
    if key in _KERNEL_CACHE:
        return _KERNEL_CACHE[key]
    if grid.d == 1:
        if spec.kind == "none":
            vals = np.zeros((grid.n_x, grid.n_p))
        else:
            vals = _wrap_transfers(_kernel_rows(spec, grid, grid.x_centers,
                                                coupling))
        kern = PotentialKernel(grid=grid, layout="one_electron", values=vals,
                               symbol=exact_symbol_1e(spec, grid, coupling))
    else:
        kern = _wigner_kernel_1e_2d(spec, grid, coupling)
    _KERNEL_CACHE[key] = kern
    return kern


def _wigner_kernel_1e_2d(spec: PotentialSpec, grid: WignerGrid,
                         coupling: float) -> PotentialKernel:
    """d=2 kernel via tensor midpoint quadrature (small grids only)."""
    n_x, n_p = grid.n_x, grid.n_p
    if spec.kind == "none":
        vals = np.zeros((n_x, n_x, n_p, n_p))
        return PotentialKernel(grid=grid, layout="one_electron", values=vals)
    if n_x * n_x * n_p * n_p > 2_000_000:
        raise CostGuardError("d=2 kernel table too large; shrink the grid")
    s, ds = _s_nodes(grid, oversample=4)
    q = grid.transfer_lattice()
    ph = np.exp(-1j * np.outer(q, s) / grid.hbar)     # (n_p, n_s)
    x = grid.x_centers
    pref = ds * ds / (grid.hbar * (2.0 * grid.coherence_length) ** 2)
    vals = np.empty((n_x, n_x, n_p, n_p))
    xs_p = x[:, None] + 0.5 * s[None, :]
    xs_m = x[:, None] - 0.5 * s[None, :]
    for i in range(n_x):
        for j in range(n_x):
            if spec.is_coulomb():
                rp2 = (xs_p[i][:, None]) ** 2 + (xs_p[j][None, :]) ** 2
                rm2 = (xs_m[i][:, None]) ** 2 + (xs_m[j][None, :]) ** 2
                dv = (spec.evaluate_radial2(rp2, coupling)
                      - spec.evaluate_radial2(rm2, coupling))
            else:
                # separable kinds act on the first axis only
                dv = (spec.evaluate(xs_p[i], coupling)
                      - spec.evaluate(xs_m[i], coupling))[:, None] \
                    * np.ones((1, len(s)))
            block = np.real(ph @ dv @ ph.T / 1j) * pref
            vals[i, j] = block
    vals = _wrap_transfers(np.moveaxis(
        _wrap_transfers(np.moveaxis(vals, 2, -1)), -1, 2))
    return PotentialKernel(grid=grid, layout="one_electron", values=vals)


def coulomb_kernel_2e(units, spec: PotentialSpec,
                      grid: WignerGrid) -> PotentialKernel:
    """Two-electron interaction kernel, stored on the q1+q2=0 diagonal.

    K(q1, q2, r1, r2) = delta(q1+q2) * W(r1 - r2, q1) where W is the
    single-electron kernel formula applied to the pair potential in the
    relative coordinate.
    """
    if not spec.is_coulomb():
        raise ValidationError("coulomb_kernel_2e needs a coulomb kind")
    if grid.d != 1:
        raise ValidationError("two-electron kernels are limited to d=1")
    if spec.kind == "coulomb2d":
        # coulomb2d belongs to planar grids; coulomb3d covers d=1 (and d=3)
        raise ValidationError("coulomb2d pair potential needs d=2")
    lam = units.coupling_lambda
    key = ("2e", spec, grid, lam)
    if key in _KERNEL_CACHE:
        return _KERNEL_CACHE[key]
    n_x = grid.n_x
    if lam == 0.0:
        vals = np.zeros((2 * n_x - 1, grid.n_p))
    else:
        deltas = (np.arange(2 * n_x - 1) - (n_x - 1)) * grid.dx
        vals = _wrap_transfers(_kernel_rows(spec, grid, deltas, lam))
    kern = PotentialKernel(grid=grid, layout="two_electron_diag", values=vals,
                           symbol=exact_symbol_pair(units, spec, grid))
    _KERNEL_CACHE[key] = kern
    return kern


def coulomb_kernel_entry(units, spec: PotentialSpec, grid: WignerGrid,
                         delta_r: float, m1: int, m2: int) -> float:
    """Direct (S, sigma) double-midpoint quadrature of one kernel entry.

    Independent of the diagonal storage path; used to check the
    delta(q1+q2) structure and the stored values.
    """
    lam = units.coupling_lambda
    if lam == 0.0:
        return 0.0
    s, ds = _s_nodes(grid)
    q1 = m1 * grid.dp
    q2 = m2 * grid.dp
    dv = (spec.evaluate(np.full(1, delta_r)[:, None] + 0.5 * s[None, :], lam)
          - spec.evaluate(np.full(1, delta_r)[:, None] - 0.5 * s[None, :], lam))[0]
    ph_sigma = np.exp(-1j * s * 0.5 * (q1 - q2) / grid.hbar)
    ph_cap = np.exp(-1j * s * (q1 + q2) / grid.hbar)
    pref = ds * ds / (1j * grid.hbar * (2.0 * grid.coherence_length) ** 2)
    val = pref * np.sum(ph_cap) * np.sum(ph_sigma * dv)
    return float(val.real)


def _symbol_s_nodes(grid: WignerGrid):
    """Relative-coordinate nodes s_nu conjugate to the wrapped DFT index.

    The DFT symbol of the periodized kernel is available in closed form:
    the Dirac comb arising from the infinite-lattice sine sum collapses the
    s-integral onto s_nu = 2 L_c nu / n_p (nu the signed DFT frequency), so

        K_hat(r, nu) = (i/hbar) [V(r + s_nu/2) - V(r - s_nu/2)].

    This is exact for the semi-discrete operator (no 1/m truncation tail),
    purely imaginary, and zero at nu=0, so exp(dt*K_hat) is a mass- and
    L2-conserving phase.  The unpaired Nyquist frequency is zeroed, matching
    the row convention.
    """
    nu = np.fft.fftfreq(grid.n_p, 1.0 / grid.n_p)
    s = 2.0 * grid.coherence_length * nu / grid.n_p
    nyquist = nu == -(grid.n_p // 2)
    return s, nyquist


def exact_symbol_1e(spec: PotentialSpec, grid: WignerGrid,
                    coupling: float = 1.0) -> np.ndarray:
    """Closed-form momentum-DFT symbol of a d=1 external-potential kernel."""
    if grid.d != 1:
        raise ValidationError("exact_symbol_1e is the d=1 path")
    s, nyquist = _symbol_s_nodes(grid)
    if spec.kind == "none":
        return np.zeros((grid.n_x, grid.n_p), dtype=complex)
    x = grid.x_centers
    dv = (spec.evaluate(x[:, None] + 0.5 * s[None, :], coupling)
          - spec.evaluate(x[:, None] - 0.5 * s[None, :], coupling))
    sym = (1j / grid.hbar) * dv
    sym[:, nyquist] = 0.0
    return sym


def exact_symbol_pair(units, spec: PotentialSpec,
                      grid: WignerGrid) -> np.ndarray:
    """Closed-form symbol of the diagonal 2e kernel, shape (2n_x-1, n_p)."""
    if grid.d != 1:
        raise ValidationError("two-electron kernels are limited to d=1")
    lam = units.coupling_lambda
    if lam == 0.0:
        return np.zeros((2 * grid.n_x - 1, grid.n_p), dtype=complex)
    deltas = (np.arange(2 * grid.n_x - 1) - (grid.n_x - 1)) * grid.dx
    s, nyquist = _symbol_s_nodes(grid)
    dv = (spec.evaluate(deltas[:, None] + 0.5 * s[None, :], lam)
          - spec.evaluate(deltas[:, None] - 0.5 * s[None, :], lam))
    sym = (1j / grid.hbar) * dv
    sym[:, nyquist] = 0.0
    return sym


def gather_pair_symbol(what: np.ndarray, grid: WignerGrid) -> np.ndarray:
    """Expand a diagonal-kernel symbol to the (i1, i2, nu1, nu2) tensor.

    The anti-diagonal convolution sum_m W(delta, m) f(p1 - m, p2 + m) is
    diagonal in the momentum DFT basis with symbol What(delta, nu1 - nu2).
    """
    i = np.arange(grid.n_x)
    delta_idx = i[:, None] - i[None, :] + (grid.n_x - 1)
    nu = np.arange(grid.n_p)
    dnu = (nu[:, None] - nu[None, :]) % grid.n_p
    return what[delta_idx][:, :, dnu]


def kernel_symbol(kernel: PotentialKernel) -> np.ndarray:
    """Momentum-DFT symbol of a row kernel (fallback for tabulated rows)."""
    return np.fft.fft(kernel.values, axis=-1)


def apply_kernel(kernel: PotentialKernel, f: WignerState) -> WignerState:
    """Momentum-space circular convolution; returns a state increment."""
    if kernel.grid != f.grid:
        raise ValidationError("kernel and state grids differ")
    g = f.grid
    if kernel.layout == "one_electron":
        if f.arity != "one":
            raise ValidationError("one-electron kernel vs two-electron state")
        if g.d == 1:
            out = _convolve_last_axis(kernel.values, f.values)
        else:
            kf = np.fft.fft2(kernel.values, axes=(2, 3))
            out = np.real(np.fft.ifft2(
                kf * np.fft.fft2(f.values, axes=(2, 3)), axes=(2, 3)))
        return f.with_values(out)
    if kernel.layout == "two_electron_diag":
        if f.arity != "two":
            raise ValidationError("two-electron kernel vs one-electron state")
        gam = interaction_symbol(kernel)
        fh = np.fft.fft2(f.values, axes=(2, 3))
        out = np.real(np.fft.ifft2(gam * fh, axes=(2, 3)))
        return f.with_values(out)
    raise ValidationError(f"unknown kernel layout {kernel.layout!r}")


def _convolve_last_axis(kern_wrapped: np.ndarray, values: np.ndarray):
    kf = np.fft.fft(kern_wrapped, axis=-1)
    return np.real(np.fft.ifft(kf * np.fft.fft(values, axis=-1), axis=-1))


def interaction_symbol(kernel: PotentialKernel) -> np.ndarray:
    """Fourier symbol of the diagonal 2e kernel on (i1, i2, nu1, nu2).

    The anti-diagonal convolution sum_m W(delta, m) f(p1 - m, p2 + m) is
    diagonal in the momentum DFT basis with symbol What(delta, nu1 - nu2).
    """
    return gather_pair_symbol(np.fft.fft(kernel.values, axis=-1), kernel.grid)


def apply_kernel_1e_on_pair(kernel: PotentialKernel, f: WignerState,
                            which: int) -> WignerState:
    """Apply a one-electron kernel to electron 1 or 2 of a pair state."""
    if kernel.layout != "one_electron" or kernel.grid.d != 1:
        raise ValidationError("needs a d=1 one-electron kernel")
    if f.arity != "two":
        raise ValidationError("needs a two-electron state")
    kf = np.fft.fft(kernel.values, axis=-1)            # (n_x, n_p)
    if which == 1:
        fh = np.fft.fft(f.values, axis=2)
        out = np.real(np.fft.ifft(kf[:, None, :, None] * fh, axis=2))
    else:
        fh = np.fft.fft(f.values, axis=3)
        out = np.real(np.fft.ifft(kf[None, :, None, :] * fh, axis=3))
    return f.with_values(out)


class ReducedKernelBuilder:
    """Mean-field kernel factory: K(r1, q) from the partner's density.

    Precomputes B[i1, m, i2] so that K = B @ n_other; B is the kernel
    quadrature of the pair potential V(x_{i1} +- s/2 - x_{i2}).
    """

    def __init__(self, spec: PotentialSpec, grid: WignerGrid, coupling: float):
        if grid.d != 1:
            raise ValidationError("reduced kernels are implemented for d=1")
        self.spec = spec
        self.grid = grid
        self.coupling = coupling
        if coupling == 0.0 or spec.kind == "none":
            self._b = None
            self._b_sym = None
            return
        s, ds = _s_nodes(grid)
        sines = _sine_table(grid, s)                   # (n_p, n_s)
        x = grid.x_centers
        arg_p = x[:, None, None] + 0.5 * s[None, :, None] - x[None, None, :]
        arg_m = x[:, None, None] - 0.5 * s[None, :, None] - x[None, None, :]
        dv = spec.evaluate(arg_p, coupling) - spec.evaluate(arg_m, coupling)
        pref = -ds * grid.dx / (grid.hbar * 2.0 * grid.coherence_length)
        b_signed = pref * np.einsum("mj,ajb->amb", sines, dv)
        self._b = _wrap_transfers(np.moveaxis(b_signed, 1, -1))
        self._b = np.moveaxis(self._b, -1, 1)          # (n_x, n_p, n_x)
        # closed-form symbol tensor for the mean-field potential of a point
        # charge at x_j: (1/hbar) [V(x +s/2 -x_j) - V(x -s/2 -x_j)] dx
        s_nu, nyquist = _symbol_s_nodes(grid)
        ap = x[:, None, None] + 0.5 * s_nu[None, :, None] - x[None, None, :]
        am = x[:, None, None] - 0.5 * s_nu[None, :, None] - x[None, None, :]
        bs = (spec.evaluate(ap, coupling) - spec.evaluate(am, coupling)) \
            * (grid.dx / grid.hbar)                    # (n_x, n_p, n_x)
        bs[:, nyquist, :] = 0.0
        self._b_sym = bs

    def from_density(self, n_other: np.ndarray) -> PotentialKernel:
        if self._b is None:
            vals = np.zeros((self.grid.n_x, self.grid.n_p))
        else:
            vals = self._b @ np.asarray(n_other, dtype=float)
        return PotentialKernel(grid=self.grid, layout="one_electron",
                               values=vals,
                               symbol=self.symbol_from_density(n_other))

    def from_state(self, f_other: WignerState) -> PotentialKernel:
        n = f_other.values.sum(axis=1) * f_other.grid.dp
        return self.from_density(n)

    def symbol_from_density(self, n_other: np.ndarray) -> np.ndarray:
        """Exact momentum-DFT symbol of the mean-field kernel."""
        if self._b_sym is None:
            return np.zeros((self.grid.n_x, self.grid.n_p), dtype=complex)
        return 1j * (self._b_sym @ np.asarray(n_other, dtype=float))

    def symbol_from_state(self, f_other: WignerState) -> np.ndarray:
        n = f_other.values.sum(axis=1) * f_other.grid.dp
        return self.symbol_from_density(n)


def get_reduced_builder(spec: PotentialSpec, grid: WignerGrid,
                        coupling: float) -> ReducedKernelBuilder:
    key = (spec, grid, coupling)
    if key not in _BUILDER_CACHE:
        _BUILDER_CACHE[key] = ReducedKernelBuilder(spec, grid, coupling)
    return _BUILDER_CACHE[key]


def reduced_kernel(f_other: WignerState, spec: PotentialSpec,
                   grid: WignerGrid, coupling: float,
                   allow_unnormalized: bool = False) -> PotentialKernel:
    """Mean-field kernel of the charge distribution n(r) = integral dP f."""
    if f_other.grid != grid or f_other.arity != "one":
        raise ValidationError("f_other must be a one-electron state on grid")
    if not allow_unnormalized and abs(f_other.integral() - 1.0) > 1e-6:
        raise ValidationError("f_other must be normalized to 1e-6")
    return get_reduced_builder(spec, grid, coupling).from_state(f_other)


def combine_kernels(*kernels: PotentialKernel) -> PotentialKernel:
    """Sum kernels of identical layout and grid."""
    kernels = [k for k in kernels if k is not None]
    first = kernels[0]
    for k in kernels[1:]:
        if k.grid != first.grid or k.layout != first.layout:
            raise ValidationError("cannot combine mismatched kernels")
    vals = sum(k.values for k in kernels)
    symbol = None
    if all(k.symbol is not None for k in kernels):
        symbol = sum(k.symbol for k in kernels)
    return PotentialKernel(grid=first.grid, layout=first.layout, values=vals,
                           symbol=symbol)


def dump_kernel(kernel: PotentialKernel, path, fmt: str = "csv"):
    """Write a kernel with a grid-descriptor header for offline inspection."""
    g = kernel.grid
    header = (f"layout={kernel.layout} d={g.d} n_x={g.n_x} n_p={g.n_p} "
              f"x_min={g.x_min} x_max={g.x_max} "
              f"coherence_length={g.coherence_length} shape={kernel.values.shape}")
    if fmt == "csv":
        np.savetxt(path, kernel.values.reshape(kernel.values.shape[0], -1),
                   delimiter=",", header=header)
    elif fmt == "npy":
        np.save(path, kernel.values)
    else:
        raise ValidationError(f"unknown dump format {fmt!r}")
