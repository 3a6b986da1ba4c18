"""Scenario runner: `mslab run <config>`, `mslab resume <checkpoint>`, `mslab validate <config>`.

Every run writes a fixed artifact layout into its output directory:
config.toml, diagnostics.csv, report.json and fields/*.bin.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy.fft
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import estimates
from .fields import (
    ConstraintError,
    ContainerError,
    CoulombData,
    CoulombState,
    divergence_residual,
    load_container,
    make_coulomb_data,
    make_lorentz_data,
    random_band_limited,
    random_vector_field,
    save_container,
)
from .fixedpoint import (
    HalvingSolver,
    MetricUndefinedError,
    NoContractionError,
    PicardRun,
    energy_series,
    residual_msc,
)
from .gauge import (
    build_lambda,
    build_lambda_direct,
    coulomb_to_lorentz,
    coulomb_to_temporal,
    gauge_residuals,
    lorentz_equation_residuals,
    lorentz_to_coulomb_data,
    observables,
    phi_lorentz_duhamel,
)
from .schrodinger import TimeStepTooLargeError
from .spectral import ScalarField, SobolevIndex, SpectralGrid, VectorField

log = logging.getLogger("mslab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
SCENARIOS = ("solve-coulomb", "gauge-pipeline", "contraction-scan", "inequality-sweep",
             "convergence-study")
CHECKPOINT_VERSION = 1


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- configuration

@dataclass
class GridConfig:
    dims: int = 2
    n: int = 32
    box_length: float = 2 * math.pi


@dataclass
class DataConfig:
    seed: int = 0
    decay: float = 3.0
    max_mode_fraction: float = 0.25
    u_amplitude: float = 0.5
    A0_amplitude: float = 0.5
    A1_amplitude: float = 0.5
    zero: bool = False
    file: str = ""
    s: float = 2.0
    sigma: float = 1.5


@dataclass
class SolverConfig:
    T: float = 0.5
    dt: float = 1e-3
    tol: float = 1e-10
    max_iter: int = 50
    metric: str = "d"
    metric_s: float = 2.0
    max_halvings: int = 8
    deterministic: bool = True
    stop_after: int = 0          # > 0: checkpoint and stop after this many iterations


@dataclass
class ScenarioConfig:
    kind: str = "solve-coulomb"
    gauge: str = "lorentz"
    scan_T: list = field(default_factory=lambda: [1.0, 0.5, 0.25])
    scan_iterations: int = 5
    dt_list: list = field(default_factory=lambda: [4e-3, 2e-3, 1e-3])
    sweeps: list = field(default_factory=list)   # [{inequality = "...", indices = [...]}]
    n_samples: int = 100
    refine: bool = False


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    data: DataConfig = field(default_factory=DataConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        unknown = set(raw) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        parts = {}
        for f in fields(cls):
            sub_cls = f.type if isinstance(f.type, type) else globals()[f.type]
            parts[f.name] = _section(sub_cls, raw.get(f.name, {}), f.name)
        cfg = cls(**parts)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        g, s, sc = self.grid, self.solver, self.scenario
        if g.dims not in (1, 2, 3) or g.n < 8 or g.n % 2 or not g.box_length > 0:
            raise ConfigError("grid: dims in {1,2,3}, even n >= 8 and box_length > 0 required")
        if not (s.T > 0 and s.dt > 0 and s.tol > 0 and s.max_iter > 0 and s.max_halvings >= 0):
            raise ConfigError("solver: T, dt, tol, max_iter must be positive")
        if s.metric not in ("d", "tilde"):
            raise ConfigError("solver.metric must be 'd' or 'tilde'")
        if s.metric == "tilde" and not (5 / 3 - 1e-12 <= s.metric_s <= 2):
            raise ConfigError("solver.metric_s must lie in [5/3, 2] for the tilde metric")
        if sc.kind not in SCENARIOS:
            raise ConfigError(f"scenario.kind must be one of {SCENARIOS}")
        if sc.gauge not in ("lorentz", "temporal"):
            raise ConfigError("scenario.gauge must be 'lorentz' or 'temporal'")
        if sc.kind in ("solve-coulomb", "gauge-pipeline", "convergence-study") and g.dims < 2 \
                and not self.data.zero:
            raise ConfigError("Coulomb-gauge scenarios need dims >= 2 (projection degenerate in 1D)")
        if sc.kind == "inequality-sweep":
            if not sc.sweeps:
                raise ConfigError("inequality-sweep needs at least one [[scenario.sweeps]] entry")
            for sw in sc.sweeps:
                if sw.get("inequality") not in estimates.INEQUALITIES or "indices" not in sw:
                    raise ConfigError(f"bad sweep entry {sw!r}")
        if not (0 < self.data.max_mode_fraction <= 2 / 3):
            raise ConfigError("data.max_mode_fraction must lie in (0, 2/3]")

    @property
    def metric_kind(self):
        return "d" if self.solver.metric == "d" else ("tilde", self.solver.metric_s)


def _section(cls, raw, name):
    if not isinstance(raw, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name: f for f in fields(cls)}
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"[{name}] unknown keys: {sorted(unknown)}")
    defaults = cls()
    out = {}
    for key, value in raw.items():
        ref = getattr(defaults, key)
        if isinstance(ref, bool):
            ok = isinstance(value, bool)
        elif isinstance(ref, int):
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif isinstance(ref, float):
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            value = float(value) if ok else value
        else:
            ok = isinstance(value, type(ref))
        if not ok:
            raise ConfigError(f"[{name}] {key}: expected {type(ref).__name__}, got {value!r}")
        out[key] = value
    return cls(**out)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    return RunConfig.from_dict(raw)


def dump_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


# ---------------------------------------------------------------- data

def build_grid(cfg: RunConfig) -> SpectralGrid:
    return SpectralGrid(cfg.grid.dims, cfg.grid.n, cfg.grid.box_length)


def _random_fields(cfg: RunConfig, g: SpectralGrid, solenoidal: bool):
    d = cfg.data
    u0 = random_band_limited(g, [d.seed, 1], d.decay, d.max_mode_fraction, amplitude=d.u_amplitude)
    A0 = random_vector_field(g, [d.seed, 2], d.decay, d.max_mode_fraction, solenoidal,
                             amplitude=d.A0_amplitude)
    A1 = random_vector_field(g, [d.seed, 3], d.decay, d.max_mode_fraction, solenoidal,
                             amplitude=d.A1_amplitude)
    return u0, A0, A1


def _file_fields(cfg: RunConfig, g: SpectralGrid):
    fg, arrays, _ = load_container(cfg.data.file)
    if not fg.same_as(g):
        raise ConfigError("data.file grid does not match [grid]")
    try:
        return (ScalarField(g, arrays["u0"]), VectorField(g, arrays["A0"].real),
                VectorField(g, arrays["A1"].real))
    except KeyError as exc:
        raise ConfigError(f"data.file lacks array {exc}") from exc


def build_coulomb_data(cfg: RunConfig, g: SpectralGrid) -> CoulombData:
    d = cfg.data
    if d.zero:
        z = VectorField.zeros(g)
        return make_coulomb_data(ScalarField.zeros(g), z, z, d.s, d.sigma)
    u0, A0, A1 = _file_fields(cfg, g) if d.file else _random_fields(cfg, g, True)
    return make_coulomb_data(u0, A0, A1, d.s, d.sigma, project=True)


def build_lorentz_data(cfg: RunConfig, g: SpectralGrid):
    d = cfg.data
    if d.zero:
        u0, A0, A1 = ScalarField.zeros(g), VectorField.zeros(g), VectorField.zeros(g)
    else:
        u0, A0, A1 = _file_fields(cfg, g) if d.file else _random_fields(cfg, g, False)
    z = ScalarField.zeros(g)
    return make_lorentz_data(u0, z, z, A0, A1, d.s, d.sigma, repair=True)


# ---------------------------------------------------------------- outputs

def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def diagnostics_rows(state: CoulombState, extra: dict | None = None) -> tuple[list, list]:
    """One row per time sample: charge, energy, divergence residual and selected norms."""
    g = state.grid
    charge = state.u.norm_series(SobolevIndex(0, 2))
    en = energy_series(state)
    div = [divergence_residual(VectorField(g, a)) for a in state.A.data]
    cols = {
        "t": state.u.times,
        "charge": charge,
        "energy": en,
        "div_residual": div,
        "u_H1": state.u.norm_series(SobolevIndex(1, 2)),
        "u_H2": state.u.norm_series(SobolevIndex(2, 2)),
        "A_H1": state.A.norm_series(SobolevIndex(1, 2)),
        "A_L4": state.A.norm_series(SobolevIndex(0, 4)),
        "dA_L2": state.dA.norm_series(SobolevIndex(0, 2)),
    }
    cols.update(extra or {})
    header = list(cols)
    rows = [[_fmt(cols[c][j]) for c in header] for j in range(len(state.u))]
    return header, rows


def write_diagnostics(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _save_state(path: Path, state: CoulombState, meta: dict) -> None:
    save_container(path, state.grid, {"u": state.u.data, "A": state.A.data, "dA": state.dA.data},
                   meta=meta)


def _coulomb_summary(state: CoulombState) -> dict:
    charge = state.u.norm_series(SobolevIndex(0, 2))
    en = energy_series(state)
    out = {"max_charge_drift": float(np.max(np.abs(charge / charge[0] - 1))) if charge[0] > 0 else 0.0,
           "max_divergence_residual": state.max_divergence_residual(),
           "energy_drift": float(np.max(np.abs(en - en[0])) / max(abs(en[0]), 1e-300))}
    if len(state.u) >= 3:
        out["residual_msc"] = residual_msc(state)
    return out


# ---------------------------------------------------------------- scenarios

def _finish_solve(out: Path, cfg: RunConfig, solver: HalvingSolver) -> dict:
    state, rep = solver.result()
    header, rows = diagnostics_rows(state)
    write_diagnostics(out / "diagnostics.csv", header, rows)
    _save_state(out / "fields" / "state.bin", state, {"T": rep.T, "dt": rep.dt})
    report = {"scenario": "solve-coulomb", "status": "converged",
              "contraction": rep.to_dict(), **_coulomb_summary(state)}
    print(f"solve-coulomb: converged in {rep.iteration_count} iterations at T={rep.T:g}, "
          f"charge drift {report['max_charge_drift']:.2e}")
    return report


def _write_checkpoint(out: Path, cfg: RunConfig, data: CoulombData, solver: HalvingSolver) -> Path:
    arrays, meta = solver.checkpoint()
    arrays.update(u0=data.u0.physical(), A0=data.A0.values, A1=data.A1.values)
    path = out / "fields" / "checkpoint.bin"
    save_container(path, data.grid, arrays, meta={
        "checkpoint_version": CHECKPOINT_VERSION, "solver": meta,
        "config": cfg.to_dict(), "s": data.s, "sigma": data.sigma})
    return path


def _drive(out: Path, cfg: RunConfig, data: CoulombData, solver: HalvingSolver,
           budget: int | None) -> dict:
    """Advance by ``budget`` iterations (None: to completion), then checkpoint or finish."""
    status = solver.advance(budget)
    ckpt = _write_checkpoint(out, cfg, data, solver)
    if status == "running":
        print(f"solve-coulomb: stopped after {solver.iterations} iterations, checkpoint {ckpt}")
        return {"scenario": "solve-coulomb", "status": "checkpointed",
                "checkpoint": str(ckpt), "contraction": solver.report().to_dict()}
    return _finish_solve(out, cfg, solver)


def scenario_solve(cfg: RunConfig, out: Path) -> dict:
    g = build_grid(cfg)
    data = build_coulomb_data(cfg, g)
    s = cfg.solver
    solver = HalvingSolver(data, s.T, s.dt, s.tol, s.max_iter, cfg.metric_kind, s.max_halvings)
    return _drive(out, cfg, data, solver, s.stop_after or None)


def _gauge_pipeline(cfg: RunConfig, g: SpectralGrid, dt: float) -> dict:
    s = cfg.solver
    yd = build_lorentz_data(cfg, g)
    cdata, lam0, lam1 = lorentz_to_coulomb_data(yd)
    solver = HalvingSolver(cdata, s.T, dt, s.tol, s.max_iter, cfg.metric_kind, s.max_halvings)
    solver.advance()
    state, rep = solver.result()
    obs_c = observables(state)
    result = {"contraction": rep.to_dict(), "coulomb": _coulomb_summary(state), "state": state}
    if cfg.scenario.gauge == "lorentz":
        lam, dlam = build_lambda(lam0, lam1, state.phi(), dt)
        lam_fd, _ = build_lambda_direct(lam0, lam1, state.phi(), dt)
        other = coulomb_to_lorentz(state, lam, dlam)
        result["lambda_form_discrepancy"] = float(np.max(np.abs(lam.data - lam_fd.data)))
        result["phi_duhamel_discrepancy"] = float(np.max(np.abs(
            phi_lorentz_duhamel(other).data - other.phi.data)))
        result["gauge_residuals"] = gauge_residuals(other, "lorentz")
        result["equation_residuals"] = lorentz_equation_residuals(other)
    else:
        other = coulomb_to_temporal(state, lam0, dt)
        result["gauge_residuals"] = gauge_residuals(other, "temporal")
    obs_o = observables(other)
    jscale = max(float(np.max(np.abs(obs_c.J.data))), 1e-300)
    disc = {"rho": float(np.max(np.abs(obs_c.rho.data - obs_o.rho.data))),
            "J_rel": float(np.max(np.abs(obs_c.J.data - obs_o.J.data))) / jscale,
            "E": float(np.max(np.abs(obs_c.E.data - obs_o.E.data)))}
    if obs_c.B is not None:
        disc["B"] = float(np.max(np.abs(obs_c.B.data - obs_o.B.data)))
    result["observable_discrepancy"] = disc
    result["other"] = other
    result["obs"] = (obs_c, obs_o)
    return result


def scenario_gauge(cfg: RunConfig, out: Path) -> dict:
    g = build_grid(cfg)
    res = _gauge_pipeline(cfg, g, cfg.solver.dt)
    state, other = res.pop("state"), res.pop("other")
    obs_c, obs_o = res.pop("obs")
    extra = {"rho_discrepancy": np.max(np.abs(obs_c.rho.data - obs_o.rho.data), axis=tuple(range(1, g.dims + 1))),
             "J_discrepancy": np.max(np.abs(obs_c.J.data - obs_o.J.data), axis=tuple(range(1, g.dims + 2))),
             "E_discrepancy": np.max(np.abs(obs_c.E.data - obs_o.E.data), axis=tuple(range(1, g.dims + 2)))}
    if cfg.scenario.gauge == "lorentz":
        extra["lorentz_residual"] = np.sqrt(np.sum(
            (other.dphi.data.real + np.stack([_div(g, a) for a in other.A.data])) ** 2,
            axis=tuple(range(1, g.dims + 1))) * g.cell_volume)
    header, rows = diagnostics_rows(state, extra)
    write_diagnostics(out / "diagnostics.csv", header, rows)
    _save_state(out / "fields" / "coulomb_state.bin", state, {"gauge": "coulomb"})
    arrays = {"u": other.u.data, "A": other.A.data, "dA": other.dA.data, "phi": other.phi.data}
    save_container(out / "fields" / f"{cfg.scenario.gauge}_state.bin", g, arrays,
                   meta={"gauge": cfg.scenario.gauge})
    d = res["observable_discrepancy"]
    print(f"gauge-pipeline ({cfg.scenario.gauge}): rho {d['rho']:.2e}, J {d['J_rel']:.2e}, "
          f"residuals {res['gauge_residuals']}")
    return {"scenario": "gauge-pipeline", "gauge": cfg.scenario.gauge, **res}


def _div(g, a):
    return g.ifft(1j * np.sum(g.kd * g.fft(a), axis=0)).real


def contraction_scan(data: CoulombData, T_values, dt: float, n_iterations: int = 5,
                     metric_kind="d") -> list:
    """Fixed-protocol ratio fit: median of d_{k+1}/d_k over the first iterations at each T."""
    out = []
    for T in T_values:
        run = PicardRun(data, dt, max(1, int(round(T / dt))), metric_kind)
        run.run(n_iterations)
        rep = run.report()
        out.append({"T": run.T, "distances": rep.distances, "ratios": rep.ratios, "ratio": rep.ratio})
    return out


def scenario_scan(cfg: RunConfig, out: Path) -> dict:
    g = build_grid(cfg)
    data = build_coulomb_data(cfg, g)
    scan = contraction_scan(data, cfg.scenario.scan_T, cfg.solver.dt, cfg.scenario.scan_iterations,
                            cfg.metric_kind)
    quotients = [scan[i]["ratio"] / scan[i + 1]["ratio"] for i in range(len(scan) - 1)]
    write_diagnostics(out / "diagnostics.csv", ["T", "ratio"],
                      [[_fmt(r["T"]), _fmt(r["ratio"])] for r in scan])
    print("contraction-scan: ratios " + ", ".join(f"r({r['T']:g})={r['ratio']:.3e}" for r in scan))
    return {"scenario": "contraction-scan", "scan": scan, "ratio_quotients": quotients,
            "sqrt2_window": [1.06, 1.77],
            "within_window": [1.06 <= q <= 1.77 for q in quotients]}


def scenario_sweep(cfg: RunConfig, out: Path) -> dict:
    g = build_grid(cfg)
    sc = cfg.scenario
    sweeps, summary = [], []
    for entry in sc.sweeps:
        name, idx = entry["inequality"], tuple(entry["indices"])
        seed = int(entry.get("seed", cfg.data.seed))
        sw = estimates.SWEEPS[name](idx, sc.n_samples, g, seed, allow_outside=bool(entry.get("explore", False)))
        sweeps.append(sw)
        rec = {"inequality": name, "indices": list(idx), "max": sw.max, "median": sw.median,
               "in_region": sw.in_region}
        if sc.refine:
            fine = estimates.SWEEPS[name](idx, sc.n_samples, SpectralGrid(g.dims, 2 * g.n, g.box_length),
                                          seed, allow_outside=bool(entry.get("explore", False)))
            sweeps.append(fine)
            rec["refinement_growth"] = fine.max / sw.max if sw.max > 0 else None
        rec["scale_covariance"] = estimates.scale_covariance(name, idx, g, seed=seed)
        summary.append(rec)
        print(f"inequality-sweep: {name} {idx} max ratio {sw.max:.3e}"
              + (f", growth {rec['refinement_growth']:.3f}" if sc.refine else ""))
    estimates.write_sweeps(sweeps, out / "sweeps.jsonl", out / "ratios.csv")
    write_diagnostics(out / "diagnostics.csv", ["inequality", "indices", "grid_n", "max", "median"],
                      [[s.inequality, " ".join(map(repr, s.indices)), s.grid_n, _fmt(s.max), _fmt(s.median)]
                       for s in sweeps])
    return {"scenario": "inequality-sweep", "sweeps": summary}


def scenario_convergence(cfg: RunConfig, out: Path) -> dict:
    g = build_grid(cfg)
    rows, levels = [], []
    for dt in cfg.scenario.dt_list:
        res = _gauge_pipeline(cfg, g, float(dt))
        rec = {"dt": float(dt), "residual_msc": res["coulomb"]["residual_msc"],
               "energy_drift": res["coulomb"]["energy_drift"],
               "gauge_residuals": res["gauge_residuals"]}
        if "equation_residuals" in res:
            rec["equation_residuals"] = res["equation_residuals"]
        levels.append(rec)
        rows.append([_fmt(dt), _fmt(rec["residual_msc"]["schrodinger"]),
                     _fmt(rec["residual_msc"]["maxwell"]), _fmt(rec["energy_drift"])])
        print(f"convergence-study: dt={dt:g} schrodinger residual "
              f"{rec['residual_msc']['schrodinger']:.3e}")
    factors = [levels[i]["residual_msc"]["schrodinger"] / levels[i + 1]["residual_msc"]["schrodinger"]
               for i in range(len(levels) - 1)]
    write_diagnostics(out / "diagnostics.csv",
                      ["dt", "schrodinger_residual", "maxwell_residual", "energy_drift"], rows)
    return {"scenario": "convergence-study", "levels": levels, "schrodinger_factors": factors}


RUNNERS = {"solve-coulomb": scenario_solve, "gauge-pipeline": scenario_gauge,
           "contraction-scan": scenario_scan, "inequality-sweep": scenario_sweep,
           "convergence-study": scenario_convergence}


# ---------------------------------------------------------------- entry points

NUMERICAL_ERRORS = (NoContractionError, TimeStepTooLargeError, FloatingPointError,
                    MetricUndefinedError, np.linalg.LinAlgError)


def _guarded(out: Path, fn, *args) -> int:
    try:
        with scipy.fft.set_workers(1 if _DETERMINISTIC[0] else (os.cpu_count() or 1)):
            report = fn(*args)
    except NUMERICAL_ERRORS as exc:
        rep = {"status": "numerical-failure", "error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, NoContractionError):
            rep["contraction"] = exc.report.to_dict()
        if isinstance(exc, TimeStepTooLargeError):
            rep["step"] = exc.step
        _write_json(out / "report.json", rep)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ConstraintError, ContainerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _write_json(out / "report.json", report)
    return EXIT_OK


_DETERMINISTIC = [True]


def run(config_path, out_dir=None) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir) if out_dir else Path(config_path).with_suffix("").parent / (
        Path(config_path).stem + "_out")
    (out / "fields").mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(dump_config(cfg))
    _DETERMINISTIC[0] = cfg.solver.deterministic
    return _guarded(out, RUNNERS[cfg.scenario.kind], cfg, out)


def _resume(ckpt: Path, out: Path, extra: int | None) -> dict:
    grid, arrays, header = load_container(ckpt)
    meta = header.get("meta", {})
    if meta.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise ContainerError(f"{ckpt}: unsupported checkpoint version {meta.get('checkpoint_version')}")
    cfg = RunConfig.from_dict(meta["config"])
    if not build_grid(cfg).same_as(grid):
        raise ContainerError(f"{ckpt}: grid mismatch between checkpoint and its config")
    data = make_coulomb_data(ScalarField(grid, arrays["u0"]), VectorField(grid, arrays["A0"].real),
                             VectorField(grid, arrays["A1"].real), meta["s"], meta["sigma"])
    it = {"u": arrays["u"], "A": arrays["A"].real, "dA": arrays["dA"].real}
    solver = HalvingSolver.restore(data, it, meta["solver"])
    (out / "config.toml").write_text(dump_config(cfg))
    return _drive(out, cfg, data, solver, extra)


def resume(checkpoint_path, out_dir=None, extra_iterations: int | None = None) -> int:
    ckpt = Path(checkpoint_path)
    out = Path(out_dir) if out_dir else ckpt.parent.parent
    try:
        load_container(ckpt)
    except ContainerError as exc:
        print(f"refusing to resume: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    (out / "fields").mkdir(parents=True, exist_ok=True)
    return _guarded(out, _resume, ckpt, out, extra_iterations)


def validate(config_path) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"valid: scenario {cfg.scenario.kind} on a {cfg.grid.dims}D grid with N={cfg.grid.n}")
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="mslab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run the scenario described by a TOML config")
    p.add_argument("config")
    p.add_argument("-o", "--out", help="artifact directory (default: <config stem>_out)")
    p = sub.add_parser("resume", help="continue a Picard iteration from a checkpoint container")
    p.add_argument("checkpoint")
    p.add_argument("-o", "--out")
    p.add_argument("--iterations", type=int, default=None,
                   help="stop again after this many iterations, 0 re-emits the checkpoint "
                        "(default: run to completion)")
    p = sub.add_parser("validate", help="parse and validate a config without running it")
    p.add_argument("config")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return run(args.config, args.out)
    if args.command == "resume":
        return resume(args.checkpoint, args.out, args.iterations)
    return validate(args.config)


if __name__ == "__main__":
    sys.exit(main())
