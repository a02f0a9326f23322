"""Scenario runner.

Commands:
    wigner2e run <config.toml> [--output-dir D] [--seed N] [--threads N]
                               [--sweep key=v1,v2,...]
    wigner2e list
    wigner2e validate <config.toml>

Exit codes: 0 success, 2 config/schema violation, 3 cost guard tripped,
4 numerical guard tripped (normalization drift > 1e-4; partial outputs are
flagged in the manifest).

A run writes into the output directory: manifest.json (resolved config,
package and dependency versions, seed, timestamp), one observable-series
CSV per model, snapshot CSVs at configured times, and comparison.csv when
model = "all".  Identical config and seed give identical CSV bytes; the
--threads flag is accepted for compatibility and does not affect results.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import pathlib
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from datetime import datetime, timezone
from importlib import resources

import numpy as np

from . import __version__
from .bbgky import CoupledState, evolve_coupled
from .core import (CostGuardError, GaussianPacket, UnitSystem,
                   ValidationError, WignerGrid, make_gaussian_state,
                   tensor_product)
from .diagnostics import SERIES_SCHEMA_VERSION, ObservableSeries
from .force_model import EnsembleConfig, forward_ensemble, \
    separability_certificate
from .potentials import PotentialSpec, coulomb_kernel_2e, wigner_kernel_1e
from .single_electron import SolverConfig1e
from .trajectories import FieldConfig
from .two_electron import SolverConfig2e, evolve_2e, export_sections

MODELS = ("full2e", "bbgky", "force")

EXIT_SCHEMA = 2
EXIT_COST = 3
EXIT_NUMERICAL = 4

NORM_DRIFT_LIMIT = 1e-4


class SchemaError(Exception):
    """Configuration violates the documented schema."""


@dataclasses.dataclass
class ScenarioConfig:
    """Fully resolved scenario; mirrors the TOML sections."""

    model: str
    horizon: float
    dt: float
    record_every: int
    seed: int
    snapshot_times: tuple
    units: UnitSystem
    softening: float
    grid_1e: WignerGrid
    grid_pair: WignerGrid
    packet1: GaussianPacket
    packet2: GaussianPacket
    fields: FieldConfig
    n_particles: int
    n_batches: int
    ensemble_h: float
    refresh_every: int
    splitting: str
    interpolation: str
    raw: dict


def _need(table: dict, section: str, key: str):
    if key not in table:
        raise SchemaError(f"missing required field [{section}] {key}")
    return table[key]


def _build_external(fields: dict) -> PotentialSpec:
    kind = fields.get("external", "none")
    try:
        return PotentialSpec(kind=kind,
                             alpha=float(fields.get("external_alpha", 0.0)),
                             k=float(fields.get("external_k", 0.0)),
                             softening=float(
                                 fields.get("external_softening", 0.0)),
                             center=float(fields.get("external_center", 0.0)))
    except ValidationError as exc:
        raise SchemaError(str(exc)) from exc


def load_config(path, seed_override: int | None = None) -> ScenarioConfig:
    """Parse and validate a scenario file; raises SchemaError on violation."""
    path = pathlib.Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise SchemaError(f"config not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError(f"config is not valid TOML: {exc}") from exc
    return config_from_raw(raw, seed_override)


def config_from_raw(raw: dict,
                    seed_override: int | None = None) -> ScenarioConfig:
    """Validate an already-parsed configuration table."""
    run = raw.get("run", {})
    model = _need(run, "run", "model")
    if model not in MODELS + ("all",):
        raise SchemaError(f"unknown model {model!r}")
    horizon = float(_need(run, "run", "horizon"))
    if horizon <= 0:
        raise SchemaError("horizon must be > 0")
    seed = int(run.get("seed", 0)) if seed_override is None else seed_override

    units_t = raw.get("units", {})
    inter = raw.get("interaction", {})
    try:
        units = UnitSystem(hbar=float(units_t.get("hbar", 1.0)),
                           mass=float(units_t.get("mass", 1.0)),
                           coupling_lambda=float(
                               inter.get("coupling_lambda", 0.0)),
                           charge=float(units_t.get("charge", 1.0)))
    except ValidationError as exc:
        raise SchemaError(str(exc)) from exc
    softening = float(inter.get("softening", 0.0))
    if units.coupling_lambda > 0 and softening <= 0:
        raise SchemaError("coupled scenarios need interaction softening > 0")

    g = raw.get("grid", {})
    try:
        d = int(_need(g, "grid", "d"))
        common = dict(d=d, x_min=float(_need(g, "grid", "x_min")),
                      x_max=float(_need(g, "grid", "x_max")),
                      coherence_length=float(
                          _need(g, "grid", "coherence_length")),
                      hbar=units.hbar)
        grid_1e = WignerGrid(n_x=int(_need(g, "grid", "n_x")),
                             n_p=int(_need(g, "grid", "n_p")), **common)
        grid_pair = WignerGrid(n_x=int(g.get("n_x_pair", g["n_x"])),
                               n_p=int(g.get("n_p_pair", g["n_p"])), **common)
    except (ValidationError, ValueError) as exc:
        raise SchemaError(str(exc)) from exc

    def packet(section):
        table = raw.get(section)
        if table is None:
            raise SchemaError(f"missing required section [{section}]")
        try:
            return GaussianPacket(
                center_r=tuple(_need(table, section, "center_r")),
                center_p=tuple(_need(table, section, "center_p")),
                sigma=tuple(_need(table, section, "sigma")))
        except (ValidationError, TypeError) as exc:
            raise SchemaError(str(exc)) from exc
    pk1, pk2 = packet("packet1"), packet("packet2")
    if len(pk1.center_r) != d or len(pk2.center_r) != d:
        raise SchemaError("packet dimensionality must match grid d")

    if units.coupling_lambda > 0:
        sep = float(np.linalg.norm(np.subtract(pk1.center_r, pk2.center_r)))
        if sep < 4.0 * (max(pk1.sigma) + max(pk2.sigma)):
            raise SchemaError(
                "coupled packets must start at least 4*(sigma1+sigma2) "
                "apart (collision avoidance)")

    fields_t = raw.get("fields", {})
    fields = FieldConfig(b0=float(fields_t.get("b0", 0.0)),
                         b1=float(fields_t.get("b1", 0.0)),
                         external=_build_external(fields_t))
    if d == 1 and fields.has_magnetic():
        raise SchemaError("magnetic fields require d = 2")

    if model in ("full2e", "all") and d != 1:
        raise SchemaError("model full2e requires d = 1")

    fm = raw.get("force_model", {})
    solver = raw.get("solver", {})
    return ScenarioConfig(
        model=model, horizon=horizon,
        dt=float(run.get("dt", 1e-3)),
        record_every=int(run.get("record_every", 100)),
        seed=seed,
        snapshot_times=tuple(run.get("snapshot_times", [])),
        units=units, softening=softening,
        grid_1e=grid_1e, grid_pair=grid_pair,
        packet1=pk1, packet2=pk2, fields=fields,
        n_particles=int(fm.get("n_particles", 100_000)),
        n_batches=int(fm.get("n_batches", 8)),
        ensemble_h=float(fm.get("h", 5e-3)),
        refresh_every=int(solver.get("refresh_every", 1)),
        splitting=str(solver.get("splitting", "strang")),
        interpolation=str(solver.get("interpolation", "spectral")),
        raw=raw)


def _pair_spec(cfg: ScenarioConfig) -> PotentialSpec | None:
    if cfg.units.coupling_lambda == 0:
        return None
    kind = "coulomb2d" if cfg.grid_1e.d == 2 else "coulomb3d"
    return PotentialSpec(kind=kind, softening=cfg.softening)


def _run_full2e(cfg: ScenarioConfig, outdir: pathlib.Path):
    grid = cfg.grid_pair
    sc = SolverConfig2e(dt=cfg.dt, interpolation=cfg.interpolation)
    f0 = tensor_product(make_gaussian_state(cfg.packet1, grid),
                        make_gaussian_state(cfg.packet2, grid))
    k_ext = (wigner_kernel_1e(cfg.fields.external, grid)
             if cfg.fields.external.kind != "none" else None)
    spec = _pair_spec(cfg)
    k_int = (coulomb_kernel_2e(cfg.units, spec, grid)
             if spec is not None else None)
    series, final, snapshots = evolve_2e(
        f0, cfg.horizon, sc, k_ext, k_ext, k_int, cfg.units,
        record_every=cfg.record_every, snapshot_times=cfg.snapshot_times)
    for t, snap in snapshots.items():
        export_sections(snap, outdir, f"full2e_t{t:g}")
    return series


def _run_bbgky(cfg: ScenarioConfig, outdir: pathlib.Path):
    grid = cfg.grid_1e
    sc = SolverConfig1e(dt=cfg.dt, splitting=cfg.splitting,
                        interpolation=cfg.interpolation)
    state = CoupledState(f1=make_gaussian_state(cfg.packet1, grid),
                         f2=make_gaussian_state(cfg.packet2, grid))
    series, final = evolve_coupled(state, cfg.horizon, cfg.fields, sc,
                                   cfg.units, _pair_spec(cfg),
                                   refresh_every=cfg.refresh_every,
                                   record_every=cfg.record_every)
    for t in cfg.snapshot_times:
        # the coupled model records no intermediate snapshots; emit the
        # final product factors when the horizon itself is requested
        if abs(t - cfg.horizon) < 0.5 * cfg.dt:
            np.savetxt(outdir / f"bbgky_t{t:g}_f1.csv", final.f1.values,
                       delimiter=",", header="rows x, cols p")
            np.savetxt(outdir / f"bbgky_t{t:g}_f2.csv", final.f2.values,
                       delimiter=",", header="rows x, cols p")
    return series


def _run_force(cfg: ScenarioConfig, outdir: pathlib.Path):
    ec = EnsembleConfig(grid=cfg.grid_pair, n_particles=cfg.n_particles,
                        seed=cfg.seed, n_batches=cfg.n_batches,
                        h=cfg.ensemble_h)
    state, series, report = forward_ensemble(
        cfg.packet1, cfg.packet2, cfg.horizon, ec, cfg.units,
        cfg.softening, cfg.fields)
    cert = separability_certificate(cfg.packet1, cfg.packet2, cfg.horizon,
                                    cfg.units, cfg.softening, cfg.fields,
                                    seed=cfg.seed + 1)
    (outdir / "force_certificate.txt").write_text(cert.summary())
    with open(outdir / "force_report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    if state is not None:
        export_sections(state, outdir, f"force_t{cfg.horizon:g}")
    return series


_RUNNERS = {"full2e": _run_full2e, "bbgky": _run_bbgky, "force": _run_force}


def _comparison_csv(series_by_model: dict, outdir: pathlib.Path):
    """Single CSV aligning purity and separability curves across models.

    Rows are the record times of the pair solver; the other models are
    sampled at their nearest recorded times.
    """
    base = series_by_model["full2e"]
    tb = base.get("t")
    cols = {"t": tb}
    for name, series in series_by_model.items():
        ts = series.get("t")
        idx = np.array([int(np.argmin(np.abs(ts - t))) for t in tb])
        for field in ("purity1", "purity2", "separability"):
            cols[f"{name}_{field}"] = series.get(field)[idx]
        prefix = "mean_x1_cv" if "mean_x1_cv" in series.columns else "mean_x1"
        for field in ("x1", "p1", "x2", "p2"):
            key = (f"mean_{field}_cv" if prefix.endswith("_cv")
                   else f"mean_{field}")
            cols[f"{name}_mean_{field}"] = series.get(key)[idx]
    for name in ("bbgky", "force"):
        moment_dist = np.max(np.abs(np.stack(
            [cols[f"{name}_mean_{f}"] - cols[f"full2e_mean_{f}"]
             for f in ("x1", "p1", "x2", "p2")])), axis=0)
        cols[f"moment_dist_full2e_{name}"] = moment_dist
    header = ",".join(cols)
    data = np.column_stack(list(cols.values()))
    with open(outdir / "comparison.csv", "w", newline="") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, data, delimiter=",", fmt="%.12g")


def _manifest(cfg: ScenarioConfig, outdir: pathlib.Path, status: dict):
    import scipy
    payload = {
        "schema_version": SERIES_SCHEMA_VERSION,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "python_version": sys.version.split()[0],
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": cfg.seed,
        "resolved_config": cfg.raw,
        "resolved_seed_override": cfg.seed,
        **status,
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)


def run_scenario(cfg: ScenarioConfig, outdir) -> int:
    """Run the configured model(s); returns the process exit code."""
    outdir = pathlib.Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    wanted = MODELS if cfg.model == "all" else (cfg.model,)
    series_by_model = {}
    try:
        for name in wanted:
            series = _RUNNERS[name](cfg, outdir)
            series_by_model[name] = series
            series.to_csv(outdir / f"{name}_series.csv")
    except CostGuardError as exc:
        _manifest(cfg, outdir, {"status": "cost-guard", "detail": str(exc)})
        print(f"cost guard: {exc}", file=sys.stderr)
        return EXIT_COST

    drift = max(float(np.max(np.abs(s.get("norm") - 1.0)))
                for s in series_by_model.values())
    if cfg.model == "all":
        _comparison_csv(series_by_model, outdir)
    if drift > NORM_DRIFT_LIMIT:
        _manifest(cfg, outdir, {"status": "partial",
                                "norm_drift": drift,
                                "detail": "normalization drift exceeded "
                                          f"{NORM_DRIFT_LIMIT}"})
        print(f"normalization drift {drift:.3e} exceeds "
              f"{NORM_DRIFT_LIMIT}; outputs flagged partial",
              file=sys.stderr)
        return EXIT_NUMERICAL
    _manifest(cfg, outdir, {"status": "ok", "norm_drift": drift})
    return 0


def bundled_scenarios() -> dict:
    """name -> traversable for every scenario shipped with the package."""
    root = resources.files("wigner2e") / "scenarios"
    return {entry.name[:-5]: entry
            for entry in sorted(root.iterdir(), key=lambda e: e.name)
            if entry.name.endswith(".toml")}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wigner2e",
        description="Two-electron phase-space scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default="out")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=None,
                       help="accepted for compatibility; results are "
                            "invariant to it")
    p_run.add_argument("--sweep", default=None, metavar="KEY=V1,V2,...",
                       help="repeat the run overriding one dotted config "
                            "key, one subdirectory per value")

    p_val = sub.add_parser("validate", help="check a scenario config")
    p_val.add_argument("config")

    sub.add_parser("list", help="list bundled scenarios")

    args = parser.parse_args(argv)

    if args.command == "list":
        for name in bundled_scenarios():
            print(name)
        return 0

    config_path = pathlib.Path(args.config)
    if not config_path.exists():
        bundled = bundled_scenarios().get(args.config)
        if bundled is not None:
            with resources.as_file(bundled) as real:
                config_path = pathlib.Path(real)

    if args.command == "validate":
        try:
            load_config(config_path)
        except SchemaError as exc:
            print(f"invalid: {exc}", file=sys.stderr)
            return EXIT_SCHEMA
        print("ok")
        return 0

    # run
    try:
        cfg = load_config(config_path, seed_override=args.seed)
    except SchemaError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA

    if args.sweep:
        key, _, values = args.sweep.partition("=")
        values = [v for v in values.split(",") if v]
        if not key or not values:
            print("invalid sweep: expected KEY=V1,V2,...", file=sys.stderr)
            return EXIT_SCHEMA
        worst = 0
        for value in values:
            raw = json.loads(json.dumps(cfg.raw))  # deep copy
            table = raw
            *parents, leaf = key.split(".")
            for part in parents:
                table = table.setdefault(part, {})
            try:
                table[leaf] = json.loads(value)
            except json.JSONDecodeError:
                table[leaf] = value
            try:
                sub_cfg = config_from_raw(raw, seed_override=args.seed)
            except SchemaError as exc:
                print(f"invalid sweep value {value!r}: {exc}",
                      file=sys.stderr)
                return EXIT_SCHEMA
            code = run_scenario(
                sub_cfg, pathlib.Path(args.output_dir) / f"{key}={value}")
            worst = max(worst, code)
        return worst

    return run_scenario(cfg, args.output_dir)


if __name__ == "__main__":
    raise SystemExit(main())
