"""Newtonian characteristics: single-electron paths in a magnetic field and
two-body paths under mutual softened-Coulomb forces.

All integrators are time-symmetric second-order splittings built from exact
subflows (position drift, momentum kick, exact-angle magnetic rotation), so
they are volume preserving, reversible to rounding, and show bounded,
non-drifting energy errors.  The magnetic rotation uses the exact angle
omega(r) * h, which machine-conserves |P| and closes a cyclotron orbit after
a full period up to rounding (the per-step rotations sum to a closed regular
polygon).  Pair forces are computed once per step with F21 = -F12, so the
total momentum of a pair is conserved bit-for-bit.

Everything is vectorized over leading batch axes: a "point" may be a single
(d,) vector or an (N, d) batch, which is what the ensemble estimator uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import UnitSystem, ValidationError
from .potentials import PotentialSpec


@dataclass(frozen=True)
class FieldConfig:
    """Magnetic field B = (0, 0, b0 + b1*x) plus an external potential.

    The magnetic components require d=2 (field normal to the plane); for
    d=1 runs both must be zero.
    """

    b0: float = 0.0
    b1: float = 0.0
    external: PotentialSpec = field(default_factory=PotentialSpec)

    def b_z(self, x):
        return self.b0 + self.b1 * np.asarray(x, dtype=float)

    def has_magnetic(self) -> bool:
        return self.b0 != 0.0 or self.b1 != 0.0


def magnetic_force(p, r, cfg: FieldConfig,
                   units: UnitSystem = UnitSystem()) -> np.ndarray:
    """Lorentz force (e/m) P x B for B along z; requires planar points."""
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    if p.shape[-1] != 2 or r.shape[-1] != 2:
        if cfg.has_magnetic():
            raise ValidationError("magnetic forces require d=2 points")
        return np.zeros_like(p)
    bz = cfg.b_z(r[..., 0])
    pref = units.charge / units.mass
    return pref * np.stack((p[..., 1] * bz, -p[..., 0] * bz), axis=-1)


def external_force(spec: PotentialSpec, r, coupling: float = 1.0):
    """-grad V for the external potential (first-axis action for d=2)."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    if spec.kind == "none":
        return out
    x = r[..., 0] if r.ndim >= 1 else r
    if spec.kind == "linear":
        fx = -spec.alpha * np.ones_like(x)
    elif spec.kind == "quadratic":
        fx = -spec.k * x
    elif spec.kind == "coulomb3d":
        u = x - spec.center
        fx = coupling * u / (u * u + spec.softening ** 2) ** 1.5
    elif spec.kind == "coulomb2d":
        u = x - spec.center
        fx = coupling * u / (u * u + spec.softening ** 2)
    else:  # tabulated: central finite difference on the table spacing
        xs, _ = spec.samples
        eps = 0.5 * (xs[1] - xs[0])
        fx = -(spec.evaluate(x + eps, coupling)
               - spec.evaluate(x - eps, coupling)) / (2 * eps)
    if r.ndim >= 1 and r.shape[-1] in (1, 2):
        out[..., 0] = fx
    else:
        out = fx
    return out


def coulomb_force(r1, r2, units: UnitSystem, softening: float):
    """Softened repulsive pair forces (F12, F21) with F21 = -F12 exactly.

    d=1/d=3 kind: F12 = lambda * u / (|u|^2 + eps^2)^(3/2),
    d=2 kind:     F12 = lambda * u / (|u|^2 + eps^2),       u = r1 - r2.
    """
    if softening <= 0 and units.coupling_lambda > 0:
        raise ValidationError("pair forces need softening > 0")
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    u = r1 - r2
    if u.ndim == 0:
        u = u[None]
        squeeze = True
    else:
        squeeze = False
    d = u.shape[-1]
    rho2 = np.sum(u * u, axis=-1, keepdims=True) + softening ** 2
    if d == 2:
        f12 = units.coupling_lambda * u / rho2
    else:
        f12 = units.coupling_lambda * u / rho2 ** 1.5
    if squeeze:
        f12 = f12[0]
    return f12, -f12


def _n_steps(t_from: float, t_to: float, h: float) -> int:
    span = abs(t_to - t_from)
    if span == 0.0:
        return 0
    return max(1, int(round(span / h)))


def default_step(cfg: FieldConfig, units: UnitSystem,
                 h: float = 1e-3) -> float:
    """h = min(1e-3, 0.01/omega_c) when a homogeneous field is present."""
    if cfg.b0 != 0.0:
        omega_c = abs(units.charge * cfg.b0 / units.mass)
        return min(h, 0.01 / omega_c)
    return h


def _rotate(p, r, cfg: FieldConfig, units: UnitSystem, dt: float):
    """Exact-angle magnetic rotation of P at frozen position."""
    bz = cfg.b_z(np.asarray(r, dtype=float)[..., 0])
    theta = (units.charge / units.mass) * bz * dt
    c, s = np.cos(theta), np.sin(theta)
    px, py = p[..., 0], p[..., 1]
    return np.stack((c * px + s * py, -s * px + c * py), axis=-1)


def integrate_1e(start, t_from: float, t_to: float, cfg: FieldConfig,
                 units: UnitSystem = UnitSystem(), h: float = 1e-3,
                 record: bool = True):
    """Single-electron characteristic path, forward or backward in time.

    start = (r, P) with r, P of shape (d,) or batched (N, d).  Returns
    (times, r_path, p_path) when record else the endpoint (r, P).
    Per step: kick(h/2) drift(h/2) rotate(h) drift(h/2) kick(h/2).
    """
    if h <= 0:
        raise ValidationError("step h must be positive")
    r = np.array(start[0], dtype=float)
    p = np.array(start[1], dtype=float)
    if r.ndim == 0:
        r, p = r[None], p[None]
    d = r.shape[-1]
    if d != 2 and cfg.has_magnetic():
        raise ValidationError("magnetic fields require d=2")
    h = default_step(cfg, units, h)
    n = _n_steps(t_from, t_to, h)
    dt = (t_to - t_from) / n if n else 0.0
    times = t_from + dt * np.arange(n + 1)
    rs = [r.copy()] if record else None
    ps = [p.copy()] if record else None
    inv_m = 1.0 / units.mass
    for _ in range(n):
        p = p + 0.5 * dt * external_force(cfg.external, r)
        r = r + 0.5 * dt * inv_m * p
        if d == 2 and cfg.has_magnetic():
            p = _rotate(p, r, cfg, units, dt)
        r = r + 0.5 * dt * inv_m * p
        p = p + 0.5 * dt * external_force(cfg.external, r)
        if record:
            rs.append(r.copy())
            ps.append(p.copy())
    if record:
        return times, np.array(rs), np.array(ps)
    return r, p


@dataclass
class TwoBodyTrajectory:
    """Time-ordered two-body path with its classical energy record."""

    times: np.ndarray
    r1: np.ndarray
    p1: np.ndarray
    r2: np.ndarray
    p2: np.ndarray
    h: float
    energy: np.ndarray

    def endpoint(self):
        return self.r1[-1], self.p1[-1], self.r2[-1], self.p2[-1]

    def to_csv(self, path):
        d = self.r1.shape[-1]
        cols = [self.times]
        header = ["t"]
        for name, arr in (("r1", self.r1), ("P1", self.p1),
                          ("r2", self.r2), ("P2", self.p2)):
            for ax in range(d):
                cols.append(arr[:, ax])
                header.append(f"{name}_{'xy'[ax] if d == 2 else 'x'}")
        cols.append(self.energy)
        header.append("energy")
        np.savetxt(path, np.column_stack(cols), delimiter=",",
                   header=",".join(header), comments="")


def pair_energy(r1, p1, r2, p2, units: UnitSystem, softening: float,
                cfg: FieldConfig | None = None):
    """Sum |P_j|^2 / 2m + V_pair(|r1-r2|) (+ external potential terms)."""
    kin = (np.sum(p1 * p1, axis=-1) + np.sum(p2 * p2, axis=-1)) \
        / (2.0 * units.mass)
    pot = 0.0
    if units.coupling_lambda != 0.0:
        u = np.asarray(r1, dtype=float) - np.asarray(r2, dtype=float)
        rho2 = np.sum(u * u, axis=-1)
        d = np.shape(u)[-1]
        if d == 2:
            pot = -0.5 * units.coupling_lambda \
                * np.log(rho2 + softening ** 2)
        else:
            pot = units.coupling_lambda / np.sqrt(rho2 + softening ** 2)
    if cfg is not None and cfg.external.kind != "none":
        x1 = np.asarray(r1, dtype=float)[..., 0]
        x2 = np.asarray(r2, dtype=float)[..., 0]
        pot = pot + cfg.external.evaluate(x1) + cfg.external.evaluate(x2)
    return kin + pot


def step_pair(r1, p1, r2, p2, dt: float, units: UnitSystem,
              softening: float, cfg: FieldConfig | None = None):
    """One symmetric two-body step; batched over leading axes.

    kick(dt/2) drift(dt/2) rotate(dt) drift(dt/2) kick(dt/2); the kick uses
    the pair force (computed once, F21 = -F12) plus any external force.
    """
    inv_m = 1.0 / units.mass
    cfg = cfg or FieldConfig()
    d = np.shape(r1)[-1]
    magnetic = d == 2 and cfg.has_magnetic()

    def kick(r1, p1, r2, p2, tau):
        f12, f21 = coulomb_force(r1, r2, units, softening)
        f12 = f12 + external_force(cfg.external, r1)
        f21 = f21 + external_force(cfg.external, r2)
        return p1 + tau * f12, p2 + tau * f21

    p1, p2 = kick(r1, p1, r2, p2, 0.5 * dt)
    r1 = r1 + 0.5 * dt * inv_m * p1
    r2 = r2 + 0.5 * dt * inv_m * p2
    if magnetic:
        p1 = _rotate(p1, r1, cfg, units, dt)
        p2 = _rotate(p2, r2, cfg, units, dt)
    r1 = r1 + 0.5 * dt * inv_m * p1
    r2 = r2 + 0.5 * dt * inv_m * p2
    p1, p2 = kick(r1, p1, r2, p2, 0.5 * dt)
    return r1, p1, r2, p2


def integrate_2e(start, t_from: float, t_to: float, units: UnitSystem,
                 softening: float, cfg: FieldConfig | None = None,
                 h: float = 1e-3, record: bool = True):
    """Two-body path from start = (r1, P1, r2, P2); supports batches.

    Backward runs use t_to < t_from.  Returns a TwoBodyTrajectory when
    record else the endpoint tuple.
    """
    if h <= 0:
        raise ValidationError("step h must be positive")
    if units.coupling_lambda > 0 and softening <= 0:
        raise ValidationError("softening must be positive when lambda > 0")
    r1, p1, r2, p2 = (np.array(a, dtype=float) for a in start)
    cfg = cfg or FieldConfig()
    h = default_step(cfg, units, h)
    n = _n_steps(t_from, t_to, h)
    dt = (t_to - t_from) / n if n else 0.0
    if record:
        times = t_from + dt * np.arange(n + 1)
        shp = (n + 1,) + r1.shape
        rs1, ps1 = np.empty(shp), np.empty(shp)
        rs2, ps2 = np.empty(shp), np.empty(shp)
        rs1[0], ps1[0], rs2[0], ps2[0] = r1, p1, r2, p2
    for i in range(n):
        r1, p1, r2, p2 = step_pair(r1, p1, r2, p2, dt, units, softening, cfg)
        if record:
            rs1[i + 1], ps1[i + 1] = r1, p1
            rs2[i + 1], ps2[i + 1] = r2, p2
    if record:
        energy = pair_energy(rs1, ps1, rs2, ps2, units, softening, cfg)
        return TwoBodyTrajectory(times=times, r1=rs1, p1=ps1, r2=rs2,
                                 p2=ps2, h=abs(dt), energy=energy)
    return r1, p1, r2, p2
