"""Run configurations, figure scenarios and parameter sweeps.

A run configuration is one JSON object::

    {
      "model": "full_mirror",            # any ModelKind, "lattice" or "residue_series"
      "spec": {"cap_ratio": 0.5, "imp_ratio": 0.7071, "roundtrips": 2},
      "placement": {"kind": "node", "order": 2},        # optional
      "integrator": {"substeps_per_delay": null, "per_period": 64, "horizon_in_T": 6},
      "lattice": {"points_per_wavelength": 128},
      "output": {"path": "out.csv", "columns": null, "sample_stride": 1},
      "options": {"initial": "charge", "gamma": null, "history": "held"},
      "units": "natural"
    }

``params`` (raw ``c_j, c_c, l_j, z_0, delay_t``) may replace ``spec``. In
natural units ``spec.omega_0`` defaults to 1; with ``"units": "si"`` it must
be given. Open-line runs (no delay) use ``integrator.horizon_periods``
(default 10 qubit periods) or an absolute ``integrator.horizon``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analytic import ResidueSeriesParams, coupling_spectrum, residue_series_state
from .lattice import build_lattice, integrate_lattice
from .models import ModelKind, choose_step, fit_decay_rate, initial_state, qubit_energy, simulate
from .params import (
    CircuitParams,
    DimensionlessSpec,
    Placement,
    build_params,
    dark_state_energy_ratio,
    delay_for_placement,
    derive,
)
from .trajectory import Trajectory, config_hash

EXTRA_MODELS = ("lattice", "residue_series")
SPEC_FIELDS = ("omega_0", "cap_ratio", "imp_ratio", "roundtrips", "gamma0_t", "capacitance_scale", "v_0")
PARAM_FIELDS = ("c_j", "c_c", "l_j", "z_0", "delay_t", "v_0")
THREADS_ENV = "MIRRORQED_THREADS"


class ConfigError(ValueError):
    """The run configuration is malformed or inconsistent."""


@dataclass(frozen=True)
class IntegratorConfig:
    substeps_per_delay: int | None = None
    per_period: int = 64
    horizon_in_t: float = 6.0
    horizon_periods: float = 10.0
    horizon: float | None = None


@dataclass(frozen=True)
class OutputConfig:
    path: str | None = None
    columns: tuple[str, ...] | None = None
    sample_stride: int = 1


@dataclass(frozen=True)
class RunConfig:
    model: str
    spec: DimensionlessSpec | None = None
    params: CircuitParams | None = None
    placement: Placement | None = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    points_per_wavelength: int = 128
    output: OutputConfig = field(default_factory=OutputConfig)
    initial: str = "charge"
    gamma: float | str | None = None
    history: str = "held"
    units: str = "natural"
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def circuit(self) -> CircuitParams:
        """Circuit constants with the placement applied."""
        if self.spec is not None:
            spec = self.spec
            if self.placement is not None:
                spec = _place_spec(spec, self.placement)
            try:
                return build_params(spec)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        params = self.params
        if self.placement is not None:
            if self.placement.kind == "open":
                params = params.with_delay(0.0)
            else:
                w0 = derive(params).omega_0
                params = params.with_delay(delay_for_placement(w0, self.placement.kind, self.placement.order))
        return params

    def horizon(self, params: CircuitParams) -> float:
        ig = self.integrator
        if ig.horizon is not None:
            return ig.horizon
        if params.delay_t > 0:
            return ig.horizon_in_t * params.delay_t
        return ig.horizon_periods * 2 * math.pi / derive(params).omega_0


def _place_spec(spec: DimensionlessSpec, placement: Placement) -> DimensionlessSpec:
    if placement.kind == "open":
        if spec.cap_ratio is None:
            raise ConfigError("open placement needs an explicit cap_ratio")
        return replace(spec, roundtrips=None, gamma0_t=None)
    if placement.kind == "node":
        trips = float(placement.order)
    elif placement.kind == "antinode":
        trips = placement.order + 0.5
    else:
        raise ConfigError(f"placement kind {placement.kind!r} cannot be requested")
    try:
        return replace(spec, roundtrips=trips)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _number(value, name: str, positive: bool = False, allow_none: bool = False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{name} must be a finite number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{name} must be > 0, got {value!r}")
    return value


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name} must be an object")
    return sec


def _check_keys(sec: dict, allowed, where: str) -> None:
    unknown = sorted(set(sec) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")


def parse_placement(value) -> Placement | None:
    if value is None:
        return None
    if value == "open":
        return Placement("open")
    if isinstance(value, dict):
        kind = value.get("kind")
        if kind == "open":
            return Placement("open")
        if kind in ("node", "antinode"):
            order = value.get("order")
            if isinstance(order, bool) or not isinstance(order, int):
                raise ConfigError(f"placement order must be an integer, got {order!r}")
            if (kind == "node" and order < 1) or order < 0:
                raise ConfigError(f"invalid {kind} order {order}")
            return Placement(kind, order)
    raise ConfigError(f"placement must be 'open' or {{kind: node|antinode, order: n}}, got {value!r}")


def parse_config(doc: dict) -> RunConfig:
    """Validate a decoded JSON configuration."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    _check_keys(doc, ("model", "spec", "params", "placement", "integrator", "lattice", "output",
                      "options", "units", "name"), "config")
    model = doc.get("model")
    if model in EXTRA_MODELS:
        model_name = model
    else:
        try:
            model_name = ModelKind.parse(model).value
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    units = doc.get("units", "natural")
    if units not in ("natural", "si"):
        raise ConfigError(f"units must be 'natural' or 'si', got {units!r}")

    has_spec, has_params = "spec" in doc, "params" in doc
    if has_spec == has_params:
        raise ConfigError("give exactly one of 'spec' and 'params'")
    spec = params = None
    if has_spec:
        sec = _section(doc, "spec")
        _check_keys(sec, SPEC_FIELDS, "spec")
        if units == "si" and "omega_0" not in sec:
            raise ConfigError("spec.omega_0 is required with units 'si'")
        kw = {k: _number(sec.get(k), f"spec.{k}", allow_none=True) for k in SPEC_FIELDS if k in sec}
        kw.setdefault("omega_0", 1.0)
        kw.setdefault("cap_ratio", None)
        if "imp_ratio" not in kw:
            raise ConfigError("spec.imp_ratio is required")
        try:
            spec = DimensionlessSpec(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    else:
        sec = _section(doc, "params")
        _check_keys(sec, PARAM_FIELDS, "params")
        missing = [k for k in ("c_j", "c_c", "l_j", "z_0") if k not in sec]
        if missing:
            raise ConfigError(f"params missing {missing}")
        kw = {k: _number(sec.get(k), f"params.{k}", allow_none=True) for k in PARAM_FIELDS if k in sec}
        try:
            params = CircuitParams(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    ig = _section(doc, "integrator")
    _check_keys(ig, ("substeps_per_delay", "per_period", "horizon_in_T", "horizon_periods", "horizon"), "integrator")
    substeps = ig.get("substeps_per_delay")
    if substeps is not None and (isinstance(substeps, bool) or not isinstance(substeps, int) or substeps < 1):
        raise ConfigError(f"substeps_per_delay must be a positive integer, got {substeps!r}")
    per_period = ig.get("per_period", 64)
    if isinstance(per_period, bool) or not isinstance(per_period, int) or per_period < 4:
        raise ConfigError(f"per_period must be an integer >= 4, got {per_period!r}")
    integrator = IntegratorConfig(
        substeps_per_delay=substeps,
        per_period=per_period,
        horizon_in_t=_number(ig.get("horizon_in_T", 6.0), "horizon_in_T", positive=True),
        horizon_periods=_number(ig.get("horizon_periods", 10.0), "horizon_periods", positive=True),
        horizon=_number(ig.get("horizon"), "horizon", positive=True, allow_none=True),
    )

    lat = _section(doc, "lattice")
    _check_keys(lat, ("points_per_wavelength",), "lattice")
    ppw = lat.get("points_per_wavelength", 128)
    if isinstance(ppw, bool) or not isinstance(ppw, int) or ppw < 16:
        raise ConfigError(f"points_per_wavelength must be an integer >= 16, got {ppw!r}")

    out = _section(doc, "output")
    _check_keys(out, ("path", "columns", "sample_stride"), "output")
    stride = out.get("sample_stride", 1)
    if isinstance(stride, bool) or not isinstance(stride, int) or stride < 1:
        raise ConfigError(f"sample_stride must be a positive integer, got {stride!r}")
    columns = out.get("columns")
    if columns is not None and (not isinstance(columns, list) or not all(isinstance(c, str) for c in columns)):
        raise ConfigError("output.columns must be a list of names")
    output = OutputConfig(path=out.get("path"), columns=tuple(columns) if columns else None, sample_stride=stride)

    opts = _section(doc, "options")
    _check_keys(opts, ("initial", "gamma", "history"), "options")
    initial = opts.get("initial", "charge")
    if initial not in ("charge", "bare", "flux"):
        raise ConfigError(f"options.initial must be charge, bare or flux, got {initial!r}")
    gamma = opts.get("gamma")
    if gamma is not None and gamma not in ("gamma_0", "gamma_full"):
        gamma = _number(gamma, "options.gamma")
        if gamma < 0:
            raise ConfigError("options.gamma must be >= 0")
    history = opts.get("history", "held")
    if history not in ("held", "switched"):
        raise ConfigError(f"options.history must be held or switched, got {history!r}")

    cfg = RunConfig(model=model_name, spec=spec, params=params, placement=parse_placement(doc.get("placement")),
                    integrator=integrator, points_per_wavelength=ppw, output=output, initial=initial,
                    gamma=gamma, history=history, units=units, raw=doc)
    params = cfg.circuit()
    if model_name in ("full_mirror", "approx_mirror", "system_reservoir", "residue_series") and not params.delay_t > 0:
        raise ConfigError(f"model {model_name} needs a mirror (delay_t > 0)")
    if model_name == "residue_series" and initial != "charge":
        raise ConfigError("residue_series only supports the charge initial condition")
    return cfg


def _series_trajectory(cfg: RunConfig, params: CircuitParams, horizon: float) -> Trajectory:
    """Residue-series table on the grid the approx mirror model would use."""
    kind = ModelKind.APPROX_MIRROR
    h, n = choose_step(params, kind, horizon, cfg.integrator.substeps_per_delay, cfg.integrator.per_period)
    times = np.arange(0, n + 1, cfg.output.sample_stride) * h
    d = derive(params)
    if cfg.gamma not in (None, "gamma_0"):
        raise ConfigError("residue_series uses gamma_0 only")
    sp = ResidueSeriesParams(d.gamma_0, d.omega_0, params.delay_t)
    pj, qj = residue_series_state(sp, times, cfg.history)
    amp = initial_state(params, kind, "charge")[0]
    states = np.column_stack([pj * amp, qj * amp])
    e = qubit_energy(states, params, kind)
    cols = {"p_j": states[:, 0], "q_j": states[:, 1], "phi_j": -params.l_j * states[:, 1] + 0.0,
            "e": e, "e_norm": e / e[0]}
    return Trajectory(times, cols, {"model": "residue_series", "step": h, "horizon": n * h})


def run_config(cfg: RunConfig) -> Trajectory:
    """Execute one configuration; metadata carries the config hash, model and step."""
    params = cfg.circuit()
    horizon = cfg.horizon(params)
    stride = cfg.output.sample_stride
    if cfg.model == "lattice":
        sys = build_lattice(params, cfg.points_per_wavelength, horizon)
        traj = integrate_lattice(sys, params, horizon, stride=stride, initial=cfg.initial).trajectory
    elif cfg.model == "residue_series":
        traj = _series_trajectory(cfg, params, horizon)
    else:
        traj = simulate(params, cfg.model, horizon, substeps=cfg.integrator.substeps_per_delay,
                        per_period=cfg.integrator.per_period, initial=cfg.initial, gamma=cfg.gamma,
                        history=cfg.history, stride=stride)
    meta = {"config_hash": config_hash(cfg.raw), "model": cfg.model, "step": traj.metadata["step"],
            "horizon": traj.metadata["horizon"]}
    traj = Trajectory(traj.times, traj.columns, meta)
    if cfg.output.columns:
        missing = [c for c in cfg.output.columns if c not in traj]
        if missing:
            raise ConfigError(f"model {cfg.model} has no columns {missing}; available: {traj.names}")
        traj = traj.select(cfg.output.columns)
    return traj


# --- comparisons -----------------------------------------------------------

def compare_trajectories(a: Trajectory, b: Trajectory, metric: str = "linf", column: str = "e_norm") -> float:
    if metric not in ("linf", "l2"):
        raise ConfigError(f"metric must be linf or l2, got {metric!r}")
    if len(a) != len(b) or not np.allclose(a.times, b.times, rtol=1e-9, atol=1e-12):
        raise ConfigError(f"output grids differ ({len(a)} vs {len(b)} samples)")
    if column not in a or column not in b:
        raise ConfigError(f"both runs need column {column!r}")
    diff = np.asarray(a[column]) - np.asarray(b[column])
    if metric == "linf":
        return float(np.max(np.abs(diff)))
    return float(np.sqrt(np.mean(diff**2)))


# --- figures ---------------------------------------------------------------

LOW_Z = 1 / math.sqrt(2)
FIGURES = ("fig3a", "fig3b", "fig4a", "fig4b", "fig5", "fig6")


def _node_spec(gamma0_t: float, order: int = 5, imp_ratio: float = LOW_Z) -> DimensionlessSpec:
    return DimensionlessSpec(1.0, None, imp_ratio, roundtrips=order, gamma0_t=gamma0_t)


def _curve(model: str, spec: DimensionlessSpec, horizon_in_t: float = 6.0, **options) -> dict:
    doc = {"model": model, "spec": {k: v for k, v in spec.__dict__.items() if v is not None},
           "integrator": {"horizon_in_T": horizon_in_t}}
    if "horizon" in options:
        doc["integrator"]["horizon"] = options.pop("horizon")
    if "substeps" in options:
        doc["integrator"]["substeps_per_delay"] = options.pop("substeps")
    if options:
        doc["options"] = options
    return doc


def figure_configs(name: str) -> dict[str, dict]:
    """Configuration documents for every curve of a figure (fig6 is tabulated separately)."""
    if name == "fig3a":
        node = build_params(_node_spec(0.2 * math.pi))
        r = node.cap_ratio
        horizon = 6 * node.delay_t
        return {
            "node": _curve("full_mirror", DimensionlessSpec(1.0, r, LOW_Z, roundtrips=5), horizon=horizon),
            "antinode": _curve("full_mirror", DimensionlessSpec(1.0, r, LOW_Z, roundtrips=5.5), horizon=horizon),
            "open": _curve("open_full", DimensionlessSpec(1.0, r, LOW_Z), horizon=horizon),
        }
    if name == "fig3b":
        return {
            "green": _curve("full_mirror", _node_spec(0.02 * math.pi)),
            "blue": _curve("full_mirror", _node_spec(0.2 * math.pi)),
            "purple": _curve("full_mirror", _node_spec(2 * math.pi), horizon_in_t=30.0),
        }
    if name in ("fig4a", "fig4b"):
        r, z = (0.5, LOW_Z) if name == "fig4a" else (0.05, 100.0)
        spec = DimensionlessSpec(1.0, r, z, roundtrips=2)
        params = build_params(spec)
        k = round(params.delay_t / choose_step(params, ModelKind.FULL_MIRROR, params.delay_t)[0])
        curves = {
            "full": _curve("full_mirror", spec, substeps=k),
            "approx": _curve("approx_mirror", spec, substeps=k),
        }
        if name == "fig4b":
            curves["approx_gamma_full"] = _curve("approx_mirror", spec, substeps=k, gamma="gamma_full")
        return curves
    if name == "fig5":
        spec = DimensionlessSpec(1.0, 0.5, LOW_Z)
        curves = {}
        for g in (0.1, 0.001):
            for initial in ("charge", "flux"):
                curves[f"g{g}_{initial}"] = _curve("open_approx", spec, gamma=g, initial=initial)
        return curves
    raise ConfigError(f"unknown figure {name!r}; valid: {list(FIGURES)}")


def spectrum_table(gamma: float = 0.05, mirror_l_over_v: float = 5 * math.pi,
                   omega_max: float = 2.0, points: int = 2000) -> Trajectory:
    """Squared couplings on ``omega / omega_0`` in ``(0, omega_max]`` (omega_0 = 1)."""
    omega = np.arange(1, points + 1) * (omega_max / points)
    mirror, open_line = coupling_spectrum(gamma, 1.0, mirror_l_over_v, omega)
    meta = {"config_hash": config_hash({"gamma": gamma, "l_over_v": mirror_l_over_v, "points": points}),
            "model": "coupling_spectrum", "gamma": gamma}
    return Trajectory(omega, {"v_mirror_sq": mirror, "v_open_sq": open_line * np.ones_like(omega)}, meta,
                      index_name="omega")


def run_figure(name: str) -> dict[str, Trajectory]:
    if name == "fig6":
        return {"spectrum": spectrum_table()}
    return {curve: run_config(parse_config(doc)) for curve, doc in figure_configs(name).items()}


def write_figure(name: str, outdir: str | Path) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for curve, traj in run_figure(name).items():
        path = outdir / f"{name}_{curve}.csv"
        traj.write_csv(path)
        paths.append(path)
    return paths


# --- sweeps ----------------------------------------------------------------

SWEEP_COLUMNS = ("fitted_rate", "final_e_norm", "dark_state", "rel_error")


def _with_axis(doc: dict, axis: str, value: float) -> dict:
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in doc.items()}
    section = "spec" if "spec" in out else "params"
    allowed = SPEC_FIELDS if section == "spec" else PARAM_FIELDS
    if axis not in allowed:
        raise ConfigError(f"axis {axis!r} is not a numeric {section} field; choose from {list(allowed)}")
    out[section][axis] = value
    return out


def sweep_row(doc: dict) -> tuple[float, float, float, float]:
    cfg = parse_config(doc)
    params = cfg.circuit()
    traj = run_config(replace(cfg, output=OutputConfig(sample_stride=1)))
    d = derive(params)
    period = 2 * math.pi / d.omega_0
    times, e = traj.times, traj["e"] if "e" in traj else traj["occupation"]
    fit_t, fit_e = times, e
    if params.delay_t > 0:
        mask = times < params.delay_t
        fit_t, fit_e = times[mask], e[mask]
    try:
        rate = fit_decay_rate(fit_t, fit_e, period)
    except ValueError:
        rate = math.nan
    final = float(e[-1] / e[0])
    if d.placement.kind == "node":
        dark = dark_state_energy_ratio(d.gamma_0, params.delay_t)
        rel = abs(final - dark) / dark
    else:
        dark = rel = math.nan
    return rate, final, dark, rel


def sweep_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, n)


def run_sweep(doc: dict, axis: str, values: list[float], threads: int | None = None) -> Trajectory:
    """One summary row per value, in input order."""
    parse_config(doc)
    docs = [_with_axis(doc, axis, _number(v, f"value {v!r}")) for v in values]
    for d in docs:
        parse_config(d)
    threads = sweep_threads() if threads is None else threads
    if threads > 1 and len(docs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(docs))) as pool:
            rows = list(pool.map(sweep_row, docs))
    else:
        rows = [sweep_row(d) for d in docs]
    data = np.array(rows, dtype=float).reshape(len(rows), len(SWEEP_COLUMNS))
    cols = {name: data[:, k] for k, name in enumerate(SWEEP_COLUMNS)}
    meta = {"config_hash": config_hash(doc), "axis": axis}
    return Trajectory(np.array(values, dtype=float), cols, meta, index_name=axis)
