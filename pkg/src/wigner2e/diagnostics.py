"""Model-independent observables: purity, separability, cross-model
distances, the independent Gaussian Weyl-transform oracle, and the
observable-series CSV schema shared by all drivers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (GaussianPacket, ValidationError, WignerGrid, WignerState,
                   marginal, tensor_product)

SERIES_SCHEMA_VERSION = "1"


def purity(f: WignerState, check_norm: bool = True) -> float:
    """Phase-space purity (2 pi hbar)^d * sum f^2 * cell volume.

    Equals Tr(rho^2) on the continuum; 1 for pure states.  Values slightly
    above 1 are a discretization artifact: reported clipped with a warning
    beyond 1 + 1e-3.
    """
    if check_norm and abs(f.integral() - 1.0) > 1e-3:
        raise ValidationError("purity needs a normalized state")
    d_eff = f.grid.d * (2 if f.arity == "two" else 1)
    val = ((2.0 * np.pi * f.grid.hbar) ** d_eff
           * float(np.sum(f.values ** 2)) * f.grid.cell_volume
           * (f.grid.cell_volume if f.arity == "two" else 1.0))
    if val > 1.0 + 1e-3:
        warnings.warn(f"purity {val:.6f} exceeds 1; clipped "
                      "(discretization artifact)")
        return 1.0
    return val


def reduced_purity(f: WignerState, which: int) -> float:
    """Purity of one marginal of a two-electron state."""
    return purity(marginal(f, which), check_norm=False)


def separability_metric(f: WignerState) -> float:
    """||f - marginal(1) x marginal(2)||_2 / ||f||_2 (0 iff product form)."""
    if f.arity != "two":
        raise ValidationError("separability metric needs a pair state")
    prod = tensor_product(marginal(f, 1), marginal(f, 2))
    num = float(np.sqrt(np.sum((f.values - prod.values) ** 2)))
    den = float(np.sqrt(np.sum(f.values ** 2)))
    return num / den


def _weyl_axis(x: np.ndarray, p: np.ndarray, lc: float, hbar: float,
               x0: float, p0: float, sigma: float,
               n_nodes: int) -> np.ndarray:
    """Midpoint Fourier transform over s of the 1d Gaussian density matrix.

    rho(x + s/2, x - s/2) for psi(y) ~ exp(-(y-x0)^2/(4 sigma^2) + i p0 y/hbar)
    gives rho = A * exp(-(x-x0)^2/(2 sigma^2)) exp(-s^2/(8 sigma^2) + i p0 s/hbar).
    """
    ds = 2.0 * lc / n_nodes
    s = -lc + (np.arange(n_nodes) + 0.5) * ds
    amp = (2.0 * np.pi * sigma * sigma) ** -0.5
    rho = amp * np.exp(-(x[:, None] - x0) ** 2 / (2.0 * sigma * sigma)
                       - s[None, :] ** 2 / (8.0 * sigma * sigma)
                       + 1j * p0 * s[None, :] / hbar)
    phase = np.exp(-1j * np.outer(p, s) / hbar)
    vals = np.real(rho @ phase.T) * ds / (2.0 * np.pi * hbar)
    return vals  # (n_x, n_p)


def weyl_oracle_gaussian(packet: GaussianPacket, grid: WignerGrid,
                         n_nodes: int | None = None) -> WignerState:
    """Phase-space transform of a Gaussian density matrix by quadrature.

    Independent of the closed-form construction in core (which it is used
    to validate): builds rho(x + s/2, x - s/2) and Fourier-transforms over
    the relative coordinate s, truncated at the coherence length.
    """
    if grid.d not in (1, 2):
        raise ValidationError("oracle supports d in {1, 2}")
    n_nodes = n_nodes or 32 * grid.n_p
    axes = [_weyl_axis(grid.x_centers, grid.p_centers,
                       grid.coherence_length, grid.hbar,
                       packet.center_r[ax], packet.center_p[ax],
                       packet.sigma[ax], n_nodes)
            for ax in range(grid.d)]
    if grid.d == 1:
        vals = axes[0]
    else:
        vals = np.einsum("ik,jl->ijkl", axes[0], axes[1])
    return WignerState(grid=grid, arity="one", values=vals)


def model_distance(fa: WignerState, fb: WignerState,
                   norm: str = "L2") -> float:
    """Grid-space distance between two states on a common grid."""
    if fa.grid != fb.grid or fa.arity != fb.arity:
        raise ValidationError("model_distance needs states on the same grid")
    diff = fa.values - fb.values
    vol = fa.grid.cell_volume * (fa.grid.cell_volume
                                 if fa.arity == "two" else 1.0)
    if norm.upper() == "L2":
        return float(np.sqrt(np.sum(diff * diff) * vol))
    if norm.upper() == "L1":
        return float(np.sum(np.abs(diff)) * vol)
    raise ValidationError(f"unknown norm {norm!r}")


@dataclass
class ObservableSeries:
    """Time series of run diagnostics with a normative CSV schema.

    Leading columns are fixed: t, norm, purity1, purity2, separability.
    Extra model-specific columns follow in insertion order.
    """

    columns: dict = field(default_factory=dict)

    LEADING = ("t", "norm", "purity1", "purity2", "separability")

    def append(self, **kwargs):
        for name, value in kwargs.items():
            self.columns.setdefault(name, []).append(float(value))

    def get(self, name):
        return np.asarray(self.columns[name])

    def header(self):
        extras = [c for c in self.columns if c not in self.LEADING]
        return [c for c in self.LEADING if c in self.columns] + extras

    def to_csv(self, path):
        names = self.header()
        data = np.column_stack([self.columns[c] for c in names])
        np.savetxt(path, data, delimiter=",",
                   header=",".join(names), comments="")

    @property
    def schema_version(self) -> str:
        return SERIES_SCHEMA_VERSION
