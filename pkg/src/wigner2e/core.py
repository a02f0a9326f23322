"""Phase-space grids, states and Gaussian initial conditions.

Everything downstream (kernels, solvers, diagnostics) works on the types
defined here.  Conventions:

* dimensionless units, hbar = m = e = 1 by default;
* semi-discrete momentum mesh p_k = (k + 1/2 - n_p/2) * dp with
  dp = pi * hbar / L_c, so the window is symmetric about 0 and momentum
  transfers between mesh points are integer multiples of dp;
* spatial mesh is cell-centered, integrals are cell sums times the cell
  volume (midpoint rule);
* states are treated as immutable: operations return new instances.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np


class ValidationError(ValueError):
    """A precondition on inputs was violated."""


class DomainError(ValidationError):
    """A state or packet does not fit the grid (margin rule violated)."""


class CostGuardError(RuntimeError):
    """Requested computation exceeds the configured cost guard."""


class BoundarySupportWarning(UserWarning):
    """Significant mass has reached the edge of the grid."""


@dataclass(frozen=True)
class UnitSystem:
    """Scales of the problem; coupling_lambda is the single interaction knob."""

    hbar: float = 1.0
    mass: float = 1.0
    coupling_lambda: float = 0.0
    charge: float = 1.0

    def __post_init__(self):
        if self.coupling_lambda < 0:
            raise ValidationError("coupling_lambda must be >= 0")
        if self.hbar <= 0 or self.mass <= 0:
            raise ValidationError("hbar and mass must be positive")


@dataclass(frozen=True)
class WignerGrid:
    """Tensor-product phase-space mesh for one spatial dimension count d."""

    d: int
    n_x: int
    x_min: float
    x_max: float
    coherence_length: float
    n_p: int
    hbar: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValidationError("d must be 1 or 2")
        if self.n_x < 4 or self.n_p < 4:
            raise ValidationError("n_x and n_p must be >= 4")
        if self.n_p % 2 != 0:
            raise ValidationError("n_p must be even")
        if self.x_max <= self.x_min:
            raise ValidationError("x_max must exceed x_min")
        if self.coherence_length <= 0:
            raise ValidationError("coherence length must be positive")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_x

    @property
    def dp(self) -> float:
        return np.pi * self.hbar / self.coherence_length

    @property
    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_x) + 0.5) * self.dx

    @property
    def p_centers(self) -> np.ndarray:
        return (np.arange(self.n_p) + 0.5 - self.n_p / 2) * self.dp

    @property
    def p_window(self) -> float:
        """Half-width of the symmetric momentum window."""
        return self.n_p * self.dp / 2.0

    @property
    def cell_volume(self) -> float:
        """Phase-space cell volume for one electron."""
        return (self.dx * self.dp) ** self.d

    def transfer_lattice(self) -> np.ndarray:
        """Signed momentum transfers covering one period, q_m = m*dp."""
        m = np.arange(self.n_p) - self.n_p // 2
        return m * self.dp


# Axis layout of the value arrays, by (arity, d):
#   one-electron d=1 : (x, p)
#   one-electron d=2 : (x, y, px, py)
#   two-electron d=1 : (x1, x2, p1, p2)
_SHAPES = {
    ("one", 1): lambda g: (g.n_x, g.n_p),
    ("one", 2): lambda g: (g.n_x, g.n_x, g.n_p, g.n_p),
    ("two", 1): lambda g: (g.n_x, g.n_x, g.n_p, g.n_p),
}


@dataclass(frozen=True)
class WignerState:
    grid: WignerGrid
    arity: str  # "one" | "two"
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        key = (self.arity, self.grid.d)
        if key not in _SHAPES:
            raise ValidationError(f"unsupported (arity, d) combination {key}")
        expected = _SHAPES[key](self.grid)
        if self.values.shape != expected:
            raise ValidationError(
                f"values shape {self.values.shape} != expected {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("state contains non-finite values")

    @property
    def cell_volume(self) -> float:
        v = self.grid.cell_volume
        return v * v if self.arity == "two" else v

    def integral(self) -> float:
        return float(self.values.sum()) * self.cell_volume

    def norm_l2(self) -> float:
        return float(np.sqrt((self.values ** 2).sum() * self.cell_volume))

    def with_values(self, values, time=None) -> "WignerState":
        return replace(self, values=values,
                       time=self.time if time is None else time)

    def normalized(self) -> "WignerState":
        total = self.integral()
        if total <= 0:
            raise ValidationError("cannot normalize a state with <= 0 mass")
        return self.with_values(self.values / total)

    def boundary_mass(self) -> float:
        """Fraction of mass in the outermost spatial/momentum cells."""
        v = np.abs(self.values)
        total = v.sum()
        if total == 0:
            return 0.0
        inner = v
        for ax in range(v.ndim):
            inner = np.take(inner, np.arange(1, inner.shape[ax] - 1), axis=ax)
        return float((total - inner.sum()) / total)


@dataclass(frozen=True)
class GaussianPacket:
    """Minimal-uncertainty packet; sigma is the positional spread per axis."""

    center_r: tuple
    center_p: tuple
    sigma: tuple

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.center_r, dtype=float))
        p = np.atleast_1d(np.asarray(self.center_p, dtype=float))
        s = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if not (len(r) == len(p) == len(s)):
            raise ValidationError("center_r, center_p, sigma length mismatch")
        if np.any(s <= 0):
            raise ValidationError("sigma must be positive on every axis")
        object.__setattr__(self, "center_r", tuple(r))
        object.__setattr__(self, "center_p", tuple(p))
        object.__setattr__(self, "sigma", tuple(s))

    @property
    def d(self) -> int:
        return len(self.center_r)

    def sigma_p(self, hbar: float = 1.0) -> tuple:
        return tuple(hbar / (2.0 * s) for s in self.sigma)

    def density(self, r_axes, p_axes, hbar: float = 1.0) -> np.ndarray:
        """Closed-form Wigner function on broadcastable coordinate arrays."""
        out = None
        for ax in range(self.d):
            x0, p0, s = self.center_r[ax], self.center_p[ax], self.sigma[ax]
            g = np.exp(-(r_axes[ax] - x0) ** 2 / (2.0 * s * s)
                       - 2.0 * s * s * (p_axes[ax] - p0) ** 2 / hbar ** 2)
            g = g / (np.pi * hbar)
            out = g if out is None else out * g
        return out


def _check_packet_fits(packet: GaussianPacket, grid: WignerGrid):
    if packet.d != grid.d:
        raise ValidationError(f"packet dimension {packet.d} != grid.d {grid.d}")
    sp = packet.sigma_p(grid.hbar)
    for ax in range(grid.d):
        x0, s = packet.center_r[ax], packet.sigma[ax]
        if x0 - 3 * s < grid.x_min or x0 + 3 * s > grid.x_max:
            raise DomainError(
                f"packet needs a 3-sigma spatial margin on axis {ax}")
        p0 = packet.center_p[ax]
        if abs(p0) + 3 * sp[ax] > grid.p_window:
            raise DomainError(
                f"packet needs a 3-sigma momentum margin on axis {ax}")


def make_gaussian_state(packet: GaussianPacket, grid: WignerGrid) -> WignerState:
    """Minimal-uncertainty Gaussian Wigner state, renormalized on the grid."""
    _check_packet_fits(packet, grid)
    x = grid.x_centers
    p = grid.p_centers
    if grid.d == 1:
        r_axes = (x[:, None],)
        p_axes = (p[None, :],)
    else:
        r_axes = (x[:, None, None, None], x[None, :, None, None])
        p_axes = (p[None, None, :, None], p[None, None, None, :])
    values = packet.density(r_axes, p_axes, grid.hbar)
    state = WignerState(grid=grid, arity="one", values=values, time=0.0)
    return state.normalized()


def tensor_product(f1: WignerState, f2: WignerState) -> WignerState:
    """Two-electron product state f1(1) * f2(2); d=1 grids only."""
    if f1.arity != "one" or f2.arity != "one":
        raise ValidationError("tensor_product needs one-electron states")
    if f1.grid != f2.grid:
        raise ValidationError("tensor_product needs identical grids")
    if f1.grid.d != 1:
        raise ValidationError("two-electron states are limited to d=1")
    values = np.einsum("ik,jl->ijkl", f1.values, f2.values)
    return WignerState(grid=f1.grid, arity="two", values=values,
                       time=max(f1.time, f2.time))


def marginal(f: WignerState, keep: int) -> WignerState:
    """Trace out one electron of a two-electron state (keep = 1 or 2)."""
    if f.arity != "two":
        raise ValidationError("marginal needs a two-electron state")
    if keep not in (1, 2):
        raise ValidationError("keep must be 1 or 2")
    if keep == 1:
        vals = f.values.sum(axis=(1, 3)) * f.grid.cell_volume
    else:
        vals = f.values.sum(axis=(0, 2)) * f.grid.cell_volume
    return WignerState(grid=f.grid, arity="one", values=vals, time=f.time)


def _phase_axes(f: WignerState):
    """Coordinate arrays matching each axis of f.values."""
    g = f.grid
    if f.arity == "one" and g.d == 1:
        return [g.x_centers, g.p_centers]
    if f.arity == "one" and g.d == 2:
        return [g.x_centers, g.x_centers, g.p_centers, g.p_centers]
    return [g.x_centers, g.x_centers, g.p_centers, g.p_centers]


def moment(f: WignerState, exponents) -> float:
    """Phase-space average of the monomial prod(axis_coord**exponent).

    Exponent order follows the value-array axes, e.g. (x, p) for a
    one-electron d=1 state and (x1, x2, p1, p2) for a two-electron one.
    """
    axes = _phase_axes(f)
    exponents = tuple(int(e) for e in exponents)
    if len(exponents) != len(axes):
        raise ValidationError(
            f"need {len(axes)} exponents, got {len(exponents)}")
    if any(e < 0 for e in exponents) or sum(exponents) > 4:
        raise ValidationError("observable degree must be in [0, 4]")
    w = f.values
    total = w.sum()
    if total == 0:
        raise ValidationError("cannot take moments of a zero state")
    for ax, (coord, e) in enumerate(zip(axes, exponents)):
        if e:
            shape = [1] * w.ndim
            shape[ax] = -1
            w = w * (coord ** e).reshape(shape)
    return float(w.sum() / total)


def mean_position(f: WignerState, electron: int = 1) -> float:
    if f.arity == "one":
        return moment(f, (1, 0) if f.grid.d == 1 else (1, 0, 0, 0))
    return moment(f, (1, 0, 0, 0) if electron == 1 else (0, 1, 0, 0))


def mean_momentum(f: WignerState, electron: int = 1) -> float:
    if f.arity == "one":
        return moment(f, (0, 1) if f.grid.d == 1 else (0, 0, 1, 0))
    return moment(f, (0, 0, 1, 0) if electron == 1 else (0, 0, 0, 1))


def check_boundary_support(f: WignerState, tol: float = 1e-8):
    """Warn when the compact-support assumption is breaking down."""
    frac = f.boundary_mass()
    if frac > tol:
        warnings.warn(
            f"boundary cells hold {frac:.2e} of the state's mass "
            f"(> {tol:.1e}); results may be contaminated by wrap-around",
            BoundarySupportWarning, stacklevel=2)
    return frac
