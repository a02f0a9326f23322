"""Single-electron phase-space evolution.

The equation splits into free streaming (an exact translation along
momentum-scaled characteristics), the potential-kernel convolution (a pure
phase in the momentum-DFT basis, applied as an exact exponential substep),
and, for planar runs with a linear magnetic gradient, an explicit
third-derivative correction.  The default Strang composition is therefore
second order in dt while conserving mass and the L2 norm of the kernel
substep to machine precision.

A trajectory-based Neumann iteration of the equivalent integral equation
provides an independent cross-check of the grid solver on small grids.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import (CostGuardError, UnitSystem, ValidationError, WignerGrid,
                   WignerState, moment)
from .diagnostics import ObservableSeries, purity
from .potentials import PotentialKernel, wigner_kernel_1e
from .trajectories import FieldConfig, integrate_1e


@dataclass(frozen=True)
class SolverConfig1e:
    """Grid-solver knobs for one-electron runs."""

    dt: float = 1e-3
    splitting: str = "strang"          # strang | lie
    interpolation: str = "spectral"    # spectral | linear | cubic
    neumann_order: int = 2
    neumann_time_nodes: int = 16

    def __post_init__(self):
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        if self.splitting not in ("strang", "lie"):
            raise ValidationError(f"unknown splitting {self.splitting!r}")
        if self.interpolation not in ("spectral", "linear", "cubic"):
            raise ValidationError(
                f"unknown interpolation {self.interpolation!r}")
        if not 0 <= self.neumann_order <= 3:
            raise ValidationError("neumann_order must be in 0..3")
        if self.neumann_time_nodes < 2:
            raise ValidationError("neumann_time_nodes must be >= 2")


def _advect_d1(values: np.ndarray, grid: WignerGrid, tau: float,
               mass: float, interpolation: str) -> np.ndarray:
    """Translate each momentum column by p * tau / m (periodic in x)."""
    if tau == 0.0:
        return values
    if interpolation == "spectral":
        kx = 2.0 * np.pi * np.fft.fftfreq(grid.n_x, grid.dx)
        phase = np.exp(-1j * np.outer(kx, grid.p_centers) * (tau / mass))
        return np.real(np.fft.ifft(
            phase * np.fft.fft(values, axis=0), axis=0))
    order = 1 if interpolation == "linear" else 3
    shift_cells = grid.p_centers * tau / (mass * grid.dx)
    xi = np.arange(grid.n_x)[:, None] - shift_cells[None, :]
    ki = np.broadcast_to(np.arange(grid.n_p)[None, :],
                         (grid.n_x, grid.n_p))
    return ndimage.map_coordinates(values, [xi, ki], order=order,
                                   mode="grid-wrap")


def _kernel_phase(symbol: np.ndarray, dt: float) -> np.ndarray:
    return np.exp(dt * symbol)


def _apply_phase_d1(values: np.ndarray, phase: np.ndarray) -> np.ndarray:
    return np.real(np.fft.ifft(phase * np.fft.fft(values, axis=-1), axis=-1))


def _b1_term(values: np.ndarray, grid: WignerGrid, cfg: FieldConfig,
             units: UnitSystem) -> np.ndarray:
    """Linear-gradient correction (d=2): central differences of
    (b1 hbar^2 e / 12 m) (d2_py dx - d_px d_py dy) f."""
    hbar = grid.hbar
    pref = cfg.b1 * hbar * hbar * units.charge / (12.0 * units.mass)
    dx_ = np.gradient(values, grid.dx, axis=0)
    d2py_dx = np.gradient(np.gradient(dx_, grid.dp, axis=3), grid.dp, axis=3)
    dy_ = np.gradient(values, grid.dx, axis=1)
    dpx_dpy_dy = np.gradient(np.gradient(dy_, grid.dp, axis=2),
                             grid.dp, axis=3)
    return pref * (d2py_dx - dpx_dpy_dy)


class Propagator1e:
    """Precomputed one-step map; reusable across steps and refreshable."""

    def __init__(self, grid: WignerGrid, cfg: FieldConfig,
                 kernel: PotentialKernel | None, sc: SolverConfig1e,
                 units: UnitSystem = UnitSystem()):
        if grid.d == 1 and cfg.has_magnetic():
            raise ValidationError("magnetic fields require d=2")
        self.grid = grid
        self.cfg = cfg
        self.sc = sc
        self.units = units
        if kernel is None:
            kernel = wigner_kernel_1e(cfg.external, grid)
        self.set_kernel(kernel)
        max_shift = np.max(np.abs(grid.p_centers)) * sc.dt / units.mass
        if max_shift > 0.5 * (grid.x_max - grid.x_min):
            warnings.warn("advection shift exceeds half the box per step; "
                          "reduce dt or enlarge the box")
        if grid.d == 2 and cfg.has_magnetic():
            self._feet = self._magnetic_feet()
        else:
            self._feet = None

    def set_kernel(self, kernel: PotentialKernel):
        if kernel.grid != self.grid or kernel.layout != "one_electron":
            raise ValidationError("propagator needs a one-electron kernel "
                                  "on its grid")
        self.kernel = kernel
        self._phase = _kernel_phase(kernel.propagation_symbol(), self.sc.dt)

    def _magnetic_feet(self):
        """Backward semi-Lagrangian feet for the d=2 advection substep."""
        g = self.grid
        tau = self.sc.dt if self.sc.splitting == "lie" else 0.5 * self.sc.dt
        x1, x2, p1, p2 = np.meshgrid(g.x_centers, g.x_centers,
                                     g.p_centers, g.p_centers,
                                     indexing="ij")
        r = np.stack([x1.ravel(), x2.ravel()], axis=-1)
        p = np.stack([p1.ravel(), p2.ravel()], axis=-1)
        cfg0 = FieldConfig(b0=self.cfg.b0, b1=self.cfg.b1)
        rb, pb = integrate_1e((r, p), tau, 0.0, cfg0, self.units,
                              h=max(tau, 1e-12), record=False)
        coords = [
            (rb[:, 0] - g.x_min) / g.dx - 0.5,
            (rb[:, 1] - g.x_min) / g.dx - 0.5,
            (pb[:, 0] - g.p_centers[0]) / g.dp,
            (pb[:, 1] - g.p_centers[0]) / g.dp,
        ]
        return [c.reshape((g.n_x, g.n_x, g.n_p, g.n_p)) for c in coords]

    def _advect(self, values: np.ndarray, tau: float) -> np.ndarray:
        g = self.grid
        if g.d == 1:
            return _advect_d1(values, g, tau, self.units.mass,
                              self.sc.interpolation)
        if self._feet is not None:
            order = {"linear": 1, "cubic": 3, "spectral": 3}[
                self.sc.interpolation]
            return ndimage.map_coordinates(values, self._feet, order=order,
                                           mode="grid-wrap")
        out = values
        for ax, pax in ((0, 2), (1, 3)):
            kx = 2.0 * np.pi * np.fft.fftfreq(g.n_x, g.dx)
            shape = [1, 1, 1, 1]
            shape[ax] = g.n_x
            kxs = kx.reshape(shape)
            shape = [1, 1, 1, 1]
            shape[pax] = g.n_p
            ps = g.p_centers.reshape(shape)
            phase = np.exp(-1j * kxs * ps * (tau / self.units.mass))
            out = np.real(np.fft.ifft(phase * np.fft.fft(out, axis=ax),
                                      axis=ax))
        return out

    def step(self, f: WignerState) -> WignerState:
        if f.grid != self.grid or f.arity != "one":
            raise ValidationError("state does not match the propagator")
        v = f.values
        dt = self.sc.dt
        if self.sc.splitting == "lie":
            v = self._advect(v, dt)
            if self.grid.d == 1:
                v = _apply_phase_d1(v, self._phase)
            else:
                v = self._kernel_d2(v, dt)
        else:
            v = self._advect(v, 0.5 * dt)
            if self.grid.d == 1:
                v = _apply_phase_d1(v, self._phase)
            else:
                v = self._kernel_d2(v, dt)
            v = self._advect(v, 0.5 * dt)
        if self.grid.d == 2 and self.cfg.b1 != 0.0:
            v = v + dt * _b1_term(v, self.grid, self.cfg, self.units)
        return WignerState(grid=self.grid, arity="one", values=v,
                           time=f.time + dt)

    def _kernel_d2(self, values: np.ndarray, dt: float) -> np.ndarray:
        sym = self.kernel.propagation_symbol()
        if sym.shape != values.shape:
            sym = np.fft.fft2(self.kernel.values, axes=(2, 3))
        phase = np.exp(dt * sym)
        return np.real(np.fft.ifft2(
            phase * np.fft.fft2(values, axes=(2, 3)), axes=(2, 3)))


def step_1e(f: WignerState, cfg: FieldConfig,
            kernel: PotentialKernel | None, sc: SolverConfig1e,
            units: UnitSystem = UnitSystem()) -> WignerState:
    """One split step; see Propagator1e for the reusable fast path."""
    return Propagator1e(f.grid, cfg, kernel, sc, units).step(f)


def evolve_1e(f0: WignerState, t_final: float, cfg: FieldConfig,
              sc: SolverConfig1e, units: UnitSystem = UnitSystem(),
              kernel: PotentialKernel | None = None,
              record_every: int = 10):
    """Drive the grid solver to t_final; returns (series, final state)."""
    prop = Propagator1e(f0.grid, cfg, kernel, sc, units)
    n = max(1, int(round(t_final / sc.dt)))
    series = ObservableSeries()
    f = f0

    def record(state):
        series.append(t=state.time, norm=state.integral(),
                      purity1=purity(state, check_norm=False),
                      purity2=float("nan"), separability=0.0,
                      mean_x=moment(state, (1,) + (0,) * (2 * f0.grid.d - 1)),
                      mean_p=moment(state, (0,) * f0.grid.d + (1,)
                                    + (0,) * (f0.grid.d - 1)))

    record(f)
    for i in range(n):
        f = prop.step(f)
        if (i + 1) % record_every == 0 or i == n - 1:
            record(f)
    return series, f


def neumann_solve_1e(f0: WignerState, t: float, order: int,
                     cfg: FieldConfig | None = None,
                     kernel: PotentialKernel | None = None,
                     sc: SolverConfig1e | None = None,
                     units: UnitSystem = UnitSystem()) -> WignerState:
    """Truncated iteration of the integral form along free characteristics.

    Term 0 pulls the initial condition back along the characteristic; term
    j nests one more time integral of the kernel action (composite midpoint
    with >= neumann_time_nodes nodes per level).  Small grids only.
    """
    sc = sc or SolverConfig1e()
    cfg = cfg or FieldConfig()
    grid = f0.grid
    if grid.d != 1:
        raise ValidationError("the integral-form solver is d=1 only")
    if cfg.has_magnetic():
        raise ValidationError("magnetic fields are not supported here")
    if not 0 <= order <= 3:
        raise ValidationError("order must be in 0..3")
    cells = grid.n_x * grid.n_p
    if cells > 4096:
        raise CostGuardError(
            f"integral-form solver is limited to n_x*n_p <= 4096 cells; "
            f"got {cells} (use at most a 64x64 grid)")
    if kernel is None:
        kernel = wigner_kernel_1e(cfg.external, grid)
    sym = kernel.propagation_symbol()
    nodes = max(16, sc.neumann_time_nodes)
    mass = units.mass

    def advect(values, tau):
        return _advect_d1(values, grid, tau, mass, "spectral")

    def action(values):
        return np.real(np.fft.ifft(sym * np.fft.fft(values, axis=1), axis=1))

    def term(j, tau):
        if j == 0:
            return advect(f0.values, tau)
        if tau == 0.0:
            return np.zeros_like(f0.values)
        h = tau / nodes
        acc = np.zeros_like(f0.values)
        for i in range(nodes):
            tp = (i + 0.5) * h
            acc += advect(action(term(j - 1, tp)), tau - tp)
        return acc * h

    vals = sum(term(j, t) for j in range(order + 1))
    return WignerState(grid=grid, arity="one", values=vals, time=f0.time + t)
