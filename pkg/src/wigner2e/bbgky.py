"""Dimensionality-reduced pair dynamics: two coupled one-electron equations.

Each electron evolves under its external potential plus the mean-field
kernel of the partner's instantaneous charge density (refreshed every step
by default).  The reconstructed pair state f1 (x) f2 is separable by
construction at all times, which is the structural contrast with the full
pair solver.  The coupling makes the evolution nonlinear (the kernel depends
on the state) and non-Markovian (iterating the coupled integral forms
produces nested double-time terms that are not Neumann terms of a fixed
kernel); both properties are exposed as measurable probes here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (CostGuardError, UnitSystem, ValidationError, WignerState,
                   moment)
from .diagnostics import ObservableSeries, purity
from .potentials import (PotentialSpec, apply_kernel, combine_kernels,
                         get_reduced_builder, wigner_kernel_1e)
from .single_electron import Propagator1e, SolverConfig1e, _advect_d1
from .trajectories import FieldConfig


@dataclass
class CoupledState:
    """Pair of one-electron states evolving under mutual mean fields."""

    f1: WignerState
    f2: WignerState

    def __post_init__(self):
        if self.f1.grid != self.f2.grid:
            raise ValidationError("coupled states must share a grid")

    @property
    def time(self):
        return self.f1.time


def _density(f: WignerState) -> np.ndarray:
    return f.values.sum(axis=1) * f.grid.dp


class CoupledPropagator:
    """Reusable stepper for the coupled system with kernel refresh."""

    def __init__(self, grid, cfg: FieldConfig, sc: SolverConfig1e,
                 units: UnitSystem = UnitSystem(),
                 pair_spec: PotentialSpec | None = None,
                 refresh_every: int = 1):
        if refresh_every < 1:
            raise ValidationError("refresh_every must be >= 1")
        self.grid = grid
        self.cfg = cfg
        self.sc = sc
        self.units = units
        self.pair_spec = pair_spec
        self.refresh_every = refresh_every
        self._ext = wigner_kernel_1e(cfg.external, grid)
        self._builder = None
        if pair_spec is not None and units.coupling_lambda != 0.0 \
                and pair_spec.kind != "none":
            self._builder = get_reduced_builder(pair_spec, grid,
                                                units.coupling_lambda)
        self._p1 = Propagator1e(grid, cfg, self._ext, sc, units)
        self._p2 = Propagator1e(grid, cfg, self._ext, sc, units)
        self._since_refresh = None
        self.last_refresh_residual = 0.0

    def refresh(self, state: CoupledState):
        if self._builder is None:
            self.last_refresh_residual = 0.0
            return
        k1 = combine_kernels(self._ext,
                             self._builder.from_state(state.f2))
        k2 = combine_kernels(self._ext,
                             self._builder.from_state(state.f1))
        old = self._p1.kernel.values
        self.last_refresh_residual = float(
            np.sqrt(np.sum((k1.values - old) ** 2)))
        self._p1.set_kernel(k1)
        self._p2.set_kernel(k2)

    def step(self, state: CoupledState, step_index: int = 0) -> CoupledState:
        if step_index % self.refresh_every == 0:
            self.refresh(state)
        return CoupledState(f1=self._p1.step(state.f1),
                            f2=self._p2.step(state.f2))


def bbgky_step(state: CoupledState, cfg: FieldConfig, sc: SolverConfig1e,
               units: UnitSystem = UnitSystem(),
               pair_spec: PotentialSpec | None = None) -> CoupledState:
    """One self-consistent step: refresh both mean-field kernels from the
    partners' current densities, then advance each electron."""
    prop = CoupledPropagator(state.f1.grid, cfg, sc, units, pair_spec)
    return prop.step(state)


def evolve_coupled(state: CoupledState, t_final: float, cfg: FieldConfig,
                   sc: SolverConfig1e, units: UnitSystem = UnitSystem(),
                   pair_spec: PotentialSpec | None = None,
                   refresh_every: int = 1, record_every: int = 10):
    """Drive the coupled system; returns (series, final CoupledState).

    The separability column is identically zero: the model state is a
    product by construction.
    """
    prop = CoupledPropagator(state.f1.grid, cfg, sc, units, pair_spec,
                             refresh_every)
    n = max(1, int(round(t_final / sc.dt)))
    series = ObservableSeries()

    def record(s: CoupledState):
        series.append(t=s.time, norm=s.f1.integral(),
                      purity1=purity(s.f1, check_norm=False),
                      purity2=purity(s.f2, check_norm=False),
                      separability=0.0,
                      norm2=s.f2.integral(),
                      mean_x1=moment(s.f1, (1, 0)),
                      mean_p1=moment(s.f1, (0, 1)),
                      mean_x2=moment(s.f2, (1, 0)),
                      mean_p2=moment(s.f2, (0, 1)),
                      kernel_refresh_residual=prop.last_refresh_residual)

    record(state)
    for i in range(n):
        state = prop.step(state, i)
        if (i + 1) % record_every == 0 or i == n - 1:
            record(state)
    return series, state


def nonlinearity_probe(state: CoupledState, t_final: float, scale: float,
                       cfg: FieldConfig, sc: SolverConfig1e,
                       units: UnitSystem = UnitSystem(),
                       pair_spec: PotentialSpec | None = None) -> dict:
    """Deviation of the raw evolution map from homogeneity of degree one.

    Runs the coupled evolution from (f1, f2) and from (scale*f1, f2) with
    renormalization suppressed and returns
    ||evolve(c f1) - c evolve(f1)|| / ||c evolve(f1)|| plus the inputs.
    Zero for a linear (uncoupled) model; positive when the mean field of
    electron 1 feeds back through electron 2.
    """
    _, base = evolve_coupled(state, t_final, cfg, sc, units, pair_spec,
                             record_every=10 ** 9)
    scaled0 = CoupledState(
        f1=state.f1.with_values(scale * state.f1.values), f2=state.f2)
    _, scaled = evolve_coupled(scaled0, t_final, cfg, sc, units, pair_spec,
                               record_every=10 ** 9)
    ref = scale * base.f1.values
    dev = float(np.sqrt(np.sum((scaled.f1.values - ref) ** 2))
                / np.sqrt(np.sum(ref ** 2)))
    return {"deviation": dev, "scale": scale, "t_final": t_final,
            "coupling_lambda": units.coupling_lambda}


def coupled_first_iterate(f1_0: WignerState, f2_0: WignerState, t: float,
                          pair_spec: PotentialSpec,
                          units: UnitSystem = UnitSystem(),
                          time_nodes: int = 16):
    """First iterate of the coupled integral forms, plus the nested term.

    Returns (first, nested):
      first  = advected f1_0 + the single time integral of the partner
               kernel action with f2 frozen at f2_0 (order t),
      nested = the double-time term obtained by substituting the partner's
               own first-order change back into the coupling (order t^2) --
               the memory term that a fixed-kernel iteration cannot produce.
    Micro-grids only (n_x, n_p <= 4): the cross-validation oracle for this
    path is a brute-force nested summation.
    """
    grid = f1_0.grid
    if grid.d != 1:
        raise ValidationError("d=1 only")
    if grid.n_x > 4 or grid.n_p > 4:
        raise CostGuardError("coupled_first_iterate is limited to "
                             "n_x, n_p <= 4 (nested quadrature)")
    if f2_0.grid != grid:
        raise ValidationError("states must share a grid")
    lam = units.coupling_lambda
    builder = get_reduced_builder(pair_spec, grid, lam)
    mass = units.mass

    def adv(values, tau):
        return _advect_d1(values, grid, tau, mass, "spectral")

    def act(n_density, values):
        kern = builder.from_density(n_density)
        return apply_kernel(
            kern, WignerState(grid=grid, arity="one", values=values)).values

    def density(values):
        return values.sum(axis=1) * grid.dp

    h = t / time_nodes if t > 0 else 0.0
    nodes = (np.arange(time_nodes) + 0.5) * h
    n2_0 = density(f2_0.values)
    first = adv(f1_0.values, t)
    nested = np.zeros_like(f1_0.values)
    for tp in nodes:
        f1_at = adv(f1_0.values, tp)
        first = first + h * adv(act(n2_0, f1_at), t - tp)
        # partner's own first-iterate change up to tp: its free motion plus
        # the inner (double-time) kernel integral from the other equation
        hp = tp / time_nodes
        inner = adv(f2_0.values, tp) - f2_0.values
        for ts in (np.arange(time_nodes) + 0.5) * hp:
            n1_at = density(adv(f1_0.values, ts))
            inner = inner + hp * adv(act(n1_at, adv(f2_0.values, ts)),
                                     tp - ts)
        nested = nested + h * adv(act(density(inner), f1_at), t - tp)
    mk = lambda v: WignerState(grid=grid, arity="one", values=v, time=t)
    return mk(first), mk(nested)
