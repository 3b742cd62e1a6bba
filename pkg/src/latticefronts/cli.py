"""Command-line entry point: configs in, CSV/JSON runs out.

Every run lands in its own directory ``<out>/<experiment>-<confighash>``.
Files are first written to a hidden temporary directory which is renamed
into place only after the manifest (listing sha256 hashes of all outputs)
has been written, so a partial run never looks complete.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__, kernels
from .errors import AnsatzError, ConfigError, HypothesisError, NumericalAbort

SCHEMA_VERSION = 1
EXIT_CODES = {ConfigError: 2, HypothesisError: 3, AnsatzError: 4, NumericalAbort: 5}
EXPERIMENTS = ("check", "equilibria", "speed", "simulate", "front", "spread", "oracle", "medium-dump")
MANIFEST = "manifest.json"


def exit_code_for(exc: BaseException) -> int:
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    if isinstance(exc, ValidationError):
        return 2
    return 1


# --------------------------------------------------------------------------
# configuration


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class IntegratorConfig(_Strict):
    rtol: float = Field(1e-8, gt=0, le=1e-2)
    atol: float = Field(1e-10, gt=0, le=1e-2)
    max_step: Optional[float] = Field(None, gt=0)
    tol_state: float = Field(1e-8, gt=0)


class CheckParams(_Strict):
    window: float = Field(50.0, gt=0)
    scan_step: float = Field(1e-2, gt=0, le=0.1)
    dt_out: float = Field(0.1, gt=0)


class SpeedParams(_Strict):
    lambda_least: Optional[float] = Field(None, gt=0)
    gamma: Optional[float] = Field(None, gt=0)
    curve: bool = True
    mu_min: float = Field(0.05, gt=0)
    mu_max: float = Field(5.0, gt=0)
    curve_points: int = Field(500, ge=2, le=1_000_000)
    window: float = Field(50.0, gt=0)

    @model_validator(mode="after")
    def _range(self):
        if self.mu_max <= self.mu_min:
            raise ValueError("mu_max must exceed mu_min")
        return self


class InitialSpec(_Strict):
    type: Literal["box", "step", "constant", "csv"] = "box"
    amplitude: float = Field(0.5, ge=0)
    position: float = 0.0
    halfwidth: float = Field(5.0, ge=0)
    v: Union[float, Literal["v_star"]] = 0.0
    path: Optional[str] = None

    @model_validator(mode="after")
    def _file(self):
        if self.type == "csv":
            if not self.path:
                raise ValueError("initial.path is required for type 'csv'")
            if not os.path.isfile(self.path):
                raise ValueError(f"initial.path {self.path!r} does not exist")
        return self


class SimulateParams(_Strict):
    frame: Literal["competition", "cooperative"] = "competition"
    first: int = -100
    n_sites: int = Field(200, ge=3, le=10_000_000)
    offset: float = Field(0.0, ge=0, lt=1)
    t0: float = 0.0
    times: list[float] = Field(default_factory=lambda: [1.0, 5.0, 10.0], min_length=1)
    boundary: Literal["equilibrium", "trivial", "fixed"] = "equilibrium"
    ghosts: Optional[tuple[float, float, float, float]] = None
    initial: InitialSpec = Field(default_factory=InitialSpec)

    @model_validator(mode="after")
    def _times(self):
        ts = [self.t0] + list(self.times)
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("times must be strictly increasing and after t0")
        if self.boundary == "fixed" and self.ghosts is None:
            raise ValueError("boundary 'fixed' needs ghosts (uL, vL, uR, vR)")
        return self


class EvalWindow(_Strict):
    t0: float = 50.0
    t1: float = 200.0
    dt: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _order(self):
        if self.t1 <= self.t0:
            raise ValueError("eval.t1 must exceed eval.t0")
        return self


class FrontParams(_Strict):
    gamma: float = Field(gt=0)
    delta: float = Field(0.05, gt=0, lt=1)
    taus: list[float] = Field(default_factory=lambda: [25.0, 50.0, 100.0, 200.0], min_length=2)
    tau_max: float = Field(800.0, gt=0)
    m: int = Field(4, ge=1, le=64)
    eval: EvalWindow = Field(default_factory=EvalWindow)
    n_sites: Optional[int] = Field(None, ge=10)
    window: float = Field(20.0, gt=0)
    levels: list[float] = Field(default_factory=lambda: [0.5], min_length=1)
    phase: float = Field(0.0, ge=0, lt=1)
    a_mode: Literal["blocks", "compensated"] = "blocks"
    tol_pb: float = Field(1e-4, gt=0)
    profile_times: Optional[list[float]] = None
    stationarity_times: list[float] = Field(default_factory=list)

    @field_validator("taus")
    @classmethod
    def _taus(cls, v):
        if any(t <= 0 for t in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("taus must be positive and strictly increasing")
        return v

    @field_validator("levels")
    @classmethod
    def _levels(cls, v):
        if any(not 0 < x < 1 for x in v):
            raise ValueError("levels must lie in (0, 1)")
        return v

    @model_validator(mode="after")
    def _depth(self):
        if self.taus[-1] > self.tau_max:
            raise ValueError("largest tau exceeds tau_max")
        if self.eval.t1 - self.eval.t0 < self.window:
            raise ValueError("eval window shorter than the speed window")
        return self


class SpreadParams(_Strict):
    horizon: float = Field(300.0, gt=0)
    n_sites: int = Field(4000, ge=20)
    halfwidth: int = Field(5, ge=0)
    amplitude: Optional[float] = Field(None, gt=0)
    level: Optional[float] = Field(None, gt=0)
    dt_out: float = Field(1.0, gt=0)
    interior_fraction: float = Field(0.5, gt=0, lt=1)


class OracleParams(_Strict):
    quick: bool = False


class DumpParams(_Strict):
    t0: float = 0.0
    t1: float = 100.0
    dt: float = Field(0.1, gt=0)

    @model_validator(mode="after")
    def _order(self):
        if self.t1 <= self.t0:
            raise ValueError("t1 must exceed t0")
        return self


PARAMS = {
    "check": CheckParams, "equilibria": CheckParams, "speed": SpeedParams,
    "simulate": SimulateParams, "front": FrontParams, "spread": SpreadParams,
    "oracle": OracleParams, "medium-dump": DumpParams,
}


class Sweep(_Strict):
    seeds: Optional[list[int]] = None
    gammas: Optional[list[float]] = None

    @field_validator("gammas")
    @classmethod
    def _pos(cls, v):
        if v is not None and any(g <= 0 for g in v):
            raise ValueError("gammas must be positive")
        return v


class RunConfig(_Strict):
    """Validated run description; ``params`` is checked against the experiment's model."""

    schema_version: int = SCHEMA_VERSION
    experiment: Optional[Literal[EXPERIMENTS]] = None  # type: ignore[valid-type]
    medium: Optional[dict] = None
    horizon: tuple[float, float] = (0.0, 300.0)
    seed: Optional[int] = None
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    params: dict = Field(default_factory=dict)
    sweep: Optional[Sweep] = None
    output_dir: Optional[str] = None

    @field_validator("schema_version")
    @classmethod
    def _version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {v} (expected {SCHEMA_VERSION})")
        return v

    @field_validator("horizon")
    @classmethod
    def _horizon(cls, v):
        if not v[1] > v[0]:
            raise ValueError("horizon must be (t_start, t_end) with t_end > t_start")
        return v

    def typed_params(self):
        return PARAMS[self.experiment].model_validate(self.params)

    def medium_spec(self):
        from .env import MediumSpec

        if self.medium is None:
            return None
        data = dict(self.medium)
        if self.seed is not None:
            data["seed"] = self.seed
        return MediumSpec.model_validate(data)

    def snapshot(self) -> dict:
        return self.model_dump(mode="json")


def _line_of(text: str, loc) -> Optional[int]:
    """Best-effort line number of the innermost string key of ``loc``."""
    keys = [k for k in loc if isinstance(k, str)]
    for key in reversed(keys):
        needle = f'"{key}"'
        for n, line in enumerate(text.splitlines(), 1):
            if needle in line:
                return n
    return None


def _format_errors(exc: ValidationError, text: str, prefix=()) -> str:
    parts = []
    for err in exc.errors():
        loc = tuple(prefix) + tuple(err.get("loc", ()))
        where = ".".join(str(x) for x in loc) or "<root>"
        line = _line_of(text, loc)
        at = f" (line {line})" if line else ""
        parts.append(f"{where}{at}: {err['msg']}")
    return "; ".join(parts)


def parse_config(text: str, experiment: Optional[str] = None, seed: Optional[int] = None) -> RunConfig:
    """Validate JSON text into a RunConfig, with key and line diagnostics."""
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if experiment is not None:
        given = data.get("experiment")
        if given is not None and given != experiment and {given, experiment} != {"check", "equilibria"}:
            raise ConfigError(f"config is for experiment {given!r}, not {experiment!r}")
        data["experiment"] = experiment
    if seed is not None:
        data["seed"] = seed
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, text)) from exc
    if cfg.experiment is None:
        raise ConfigError("experiment: not given in the config or on the command line")
    try:
        cfg.typed_params()
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, text, ("params",))) from exc
    try:
        spec = cfg.medium_spec()
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, text, ("medium",))) from exc
    needs_medium = cfg.experiment not in ("oracle", "speed")
    if cfg.experiment == "speed" and cfg.typed_params().lambda_least is None:
        needs_medium = True
    if needs_medium and spec is None:
        raise ConfigError(f"medium: required for experiment {cfg.experiment!r}")
    return cfg


def load_config(path, experiment: Optional[str] = None, seed: Optional[int] = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, experiment, seed)


# --------------------------------------------------------------------------
# output helpers


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


class RunWriter:
    """Collects output files in a staging directory."""

    def __init__(self, staging: Path):
        self.dir = staging
        self.files: list[str] = []

    def _path(self, name: str) -> Path:
        p = self.dir / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return p

    def csv(self, name: str, header, columns):
        cols = [np.asarray(c).tolist() for c in columns]
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_fmt(x) for x in row])
        self._path(name).write_bytes(buf.getvalue().encode("ascii"))

    def json(self, name: str, obj):
        text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
        self._path(name).write_bytes(text.encode("utf-8"))

    def adopt(self, rel: str):
        """Register a file that some other routine wrote into the staging dir."""
        self.files.append(rel)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_id(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.snapshot(), sort_keys=True).encode()
    return f"{cfg.experiment}-{hashlib.sha256(blob).hexdigest()[:12]}"


# --------------------------------------------------------------------------
# experiments; each returns (verdict dict, exit code)


def _medium(cfg):
    from .env import Medium

    return Medium(cfg.medium_spec())


def _opts(cfg, **kw):
    from .solver import IntegratorOptions

    ic = cfg.integrator
    return IntegratorOptions(rtol=ic.rtol, atol=ic.atol, max_step=ic.max_step, tol_state=ic.tol_state, **kw)


def _exp_check(cfg, out: RunWriter):
    from .equilibria import check_hypotheses

    p = cfg.typed_params()
    medium = _medium(cfg)
    rep, _ = check_hypotheses(medium, cfg.horizon, scan_step=p.scan_step, window=p.window)
    out.json("hypotheses.json", rep.to_dict())
    verdict = {"all_pass": rep.all_pass, "verdicts": rep.verdicts}
    if not rep.all_pass:
        return verdict, 3
    from .equilibria import Equilibria

    eq = Equilibria(medium, cfg.horizon, mean_window=p.window)
    t = np.arange(cfg.horizon[0], cfg.horizon[1] + 0.5 * p.dt_out, p.dt_out)
    t = t[t <= eq.horizon[1]]
    out.csv("equilibria.csv", ["t", "u_star", "v_star", "h", "lambda"],
            [t, eq.u_star(t), eq.v_star(t), eq.h(t), eq.lambda_at(t)])
    verdict["lambda_least"] = eq.lambda_least()
    return verdict, 0


def _exp_speed(cfg, out: RunWriter):
    from .dispersion import critical_speed, decay_rates_for_speed, mu_tilde_rule, wave_speed_curve

    p = cfg.typed_params()
    lam = p.lambda_least
    source = "config"
    if lam is None:
        from .equilibria import build_equilibria

        eq = build_equilibria(_medium(cfg), cfg.horizon, mean_window=p.window)
        lam = eq.lambda_least()
        source = "medium"
    rep = critical_speed(lam)
    report = {**rep.to_dict(), "lambda_source": source}
    if p.gamma is not None:
        pair = decay_rates_for_speed(lam, p.gamma)
        report["decay"] = {"gamma": pair.gamma, "mu_minus": pair.mu_minus, "mu_plus": pair.mu_plus,
                           "mu_tilde": mu_tilde_rule(pair.mu_minus, pair.mu_star)}
    out.json("speed.json", report)
    if p.curve:
        mu = np.linspace(p.mu_min, p.mu_max, p.curve_points)
        out.csv("curve.csv", ["mu", "c"], [mu, wave_speed_curve(lam, mu)])
    return {"c0": rep.c0, "mu_star": rep.mu_star}, 0


def _initial_state(p: SimulateParams, eq, frame):
    from .solver import LatticeState

    ini = p.initial
    x = p.first + np.arange(p.n_sites) + p.offset
    if ini.type == "csv":
        with open(ini.path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if len(rows) != p.n_sites:
            raise ConfigError(f"initial.path has {len(rows)} rows, expected n_sites={p.n_sites}")
        try:
            u = np.array([float(r["u"]) for r in rows])
            v = np.array([float(r["v"]) for r in rows])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"initial.path needs numeric columns u, v: {exc}") from exc
    else:
        if ini.type == "box":
            u = np.where(np.abs(x - ini.position) <= ini.halfwidth, ini.amplitude, 0.0)
        elif ini.type == "step":
            u = np.where(x <= ini.position, ini.amplitude, 0.0)
        else:
            u = np.full(p.n_sites, ini.amplitude)
        if ini.v == "v_star":
            if eq is None:
                raise ConfigError("initial.v = 'v_star' needs a medium with equilibria")
            v = np.full(p.n_sites, float(eq.v_star(np.array(p.t0))))
        else:
            v = np.full(p.n_sites, float(ini.v))
    return LatticeState(u, v, p.t0, p.first, p.offset, frame)


def _exp_simulate(cfg, out: RunWriter):
    from .equilibria import Equilibria
    from .solver import integrate

    p = cfg.typed_params()
    medium = _medium(cfg)
    eq = Equilibria(medium, (p.t0 - 1.0, p.times[-1] + 1.0), check=True, with_h=False)
    state = _initial_state(p, eq, p.frame)
    opts = _opts(cfg, boundary=p.boundary, ghosts=p.ghosts)
    tr = integrate(p.frame, medium, state, p.t0, p.times[-1], opts, t_eval=p.times, equilibria=eq)
    names = []
    for k, st in enumerate(tr.states):
        name = f"snapshot_{k:04d}.csv"
        names.append({"file": name, "t": float(st.time)})
        out.csv(name, ["i", "x", "u", "v"], [st.index, st.x, st.u, st.v])
    stats = {k: v for k, v in tr.stats.items() if isinstance(v, (int, float, str, bool))}
    out.json("simulation.json", {"frame": p.frame, "seed": medium.spec.seed, "snapshots": names,
                                 "options": {"rtol": opts.rtol, "atol": opts.atol, "max_step": opts.max_step,
                                             "boundary": opts.boundary, "tol_state": opts.tol_state},
                                 "stats": stats})
    return {"snapshots": len(names), "accepted": stats.get("accepted")}, 0


def _exp_front(cfg, out: RunWriter):
    from .dispersion import instantaneous_speed
    from .equilibria import Equilibria, check_hypotheses
    from .fronts import (FrontBuilder, build_ansatz, least_mean_speed, profile_limits, profile_positions,
                         pullback_front, stationarity_check)

    p = cfg.typed_params()
    medium = _medium(cfg)
    rep, _ = check_hypotheses(medium, cfg.horizon)
    if not rep.all_pass:
        raise HypothesisError("; ".join(rep.messages) or "hypotheses fail")
    eval_times = np.arange(p.eval.t0, p.eval.t1 + 0.5 * p.eval.dt, p.eval.dt)
    eq = Equilibria(medium, (-p.tau_max - 5.0, float(eval_times[-1]) + 5.0))
    anz = build_ansatz(eq, p.gamma, p.delta, a_mode=p.a_mode)
    opts = _opts(cfg)
    front = pullback_front(anz, eval_times, p.taus, p.m, opts, p.tol_pb, tau_max=p.tau_max,
                           n_sites=p.n_sites, phase=p.phase)

    speeds = []
    positions = {}
    for lvl in p.levels:
        Xu = profile_positions(front, eq, lvl, "u")
        Xv = profile_positions(front, eq, lvl, "v")
        positions[lvl] = (Xu, Xv)
        meas = least_mean_speed(front.times, Xu, p.window, p.gamma, lvl)
        speeds.append({"level": lvl, "window": p.window, "estimate": meas.estimate, "target": p.gamma,
                       "rel_error": meas.rel_error, "argwindow": list(meas.argwindow)})
    Xu, Xv = positions[p.levels[0]]
    inst = instantaneous_speed(medium, eq.v_star, anz.mu, front.times)
    out.csv("speed.csv", ["t", "X_u", "X_v", "inst_speed", "integrated_speed"],
            [front.times, Xu, Xv, inst, front.S])

    ptimes = p.profile_times if p.profile_times is not None else [float(front.times[0]), float(front.times[-1])]
    written = []
    for t in ptimes:
        j = int(np.argmin(np.abs(front.times - t)))
        if abs(front.times[j] - t) > 1e-9:
            raise ConfigError(f"params.profile_times: {t} is not an eval time")
        x = front.x[j]
        ub, vb = anz.super_solution_at(x, float(front.times[j]))
        ul, vl = anz.sub_solution_at(x, float(front.times[j]))
        name = f"profile_{j:04d}.csv"
        written.append({"file": name, "t": float(front.times[j])})
        out.csv(name, ["x", "xi", "phi", "psi", "u_super", "v_super", "u_sub", "v_sub"],
                [x, x - front.S[j], front.U[j], front.V[j], ub, vb, ul, vl])

    tol = 10 * opts.atol
    limits = profile_limits(front, eq, anz.mu, anz)
    stationarity = []
    if p.stationarity_times:
        builder = FrontBuilder(p.gamma, anz.lambda_least, p.delta, p.m, p.taus, opts, p.tol_pb,
                               tau_max=p.tau_max)
        for t in p.stationarity_times:
            stationarity.append(stationarity_check(builder, medium, t, p.phase))
    verdict = {
        "ansatz": anz.to_dict(),
        "taus": front.taus,
        "gaps": front.gaps,
        "gap": front.gap,
        "converged": front.converged,
        "tau_violation": front.tau_violation,
        "sandwich": {**front.sandwich, "tolerance": tol,
                     "holds": bool(max(front.sandwich.values(), default=0.0) <= tol)},
        "max_uptick": front.max_uptick(),
        "monotone": bool(front.max_uptick() <= 1e-9),
        "limits": limits,
        "speeds": speeds,
        "stationarity": stationarity,
        "profiles": written,
        "stats": front.stats,
    }
    out.json("front.json", verdict)
    return {"converged": front.converged, "gap": front.gap, "speed": speeds[0]["estimate"]}, 0


def _exp_spread(cfg, out: RunWriter):
    from .equilibria import build_equilibria
    from .fronts import _fit, spreading_speed

    p = cfg.typed_params()
    medium = _medium(cfg)
    eq = build_equilibria(medium, (-5.0, p.horizon + 5.0))
    rep = spreading_speed(eq, p.horizon, p.n_sites, p.halfwidth, p.amplitude, p.level, p.dt_out, _opts(cfg))
    fit = np.full(len(rep.times), np.nan)
    for j, t in enumerate(rep.times):
        sel = (rep.times >= t / 2) & (rep.times <= t) & np.isfinite(rep.right)
        if sel.sum() >= 3 and t > 0:
            fit[j] = _fit(rep.times[sel], rep.right[sel])[0]
    out.csv("spread.csv", ["t", "left_edge", "right_edge", "slope_fit"], [rep.times, rep.left, rep.right, fit])
    c = p.interior_fraction * rep.c0
    report = {**rep.to_dict(), "interior_speed": c, "interior_deviation": rep.interior_deviation(eq, c),
              "final_time": rep.final.time}
    out.json("spread.json", report)
    return {"estimate": rep.estimate, "c0": rep.c0, "rel_error": rep.rel_error()}, 0


def _exp_oracle(cfg, out: RunWriter):
    from .oracles import generate_fixtures

    p = cfg.typed_params()
    target = out.dir / "fixtures"
    man = generate_fixtures(str(target), quick=p.quick)
    for f in sorted(os.listdir(target)):
        out.adopt(f"fixtures/{f}")
    return {"fixtures": sorted(man["fixtures"])}, 0


def _exp_dump(cfg, out: RunWriter):
    from .env import CHANNELS

    p = cfg.typed_params()
    medium = _medium(cfg)
    n = int(math.floor((p.t1 - p.t0) / p.dt + 1e-9))
    t = p.t0 + p.dt * np.arange(n + 1)
    vals = medium.sample_all(t)
    out.csv("medium.csv", ["t", *CHANNELS], [t, *vals])
    out.json("medium.json", medium.to_dict())
    return {"samples": len(t)}, 0


RUNNERS = {
    "check": _exp_check, "equilibria": _exp_check, "speed": _exp_speed, "simulate": _exp_simulate,
    "front": _exp_front, "spread": _exp_spread, "oracle": _exp_oracle, "medium-dump": _exp_dump,
}


# --------------------------------------------------------------------------
# orchestration


def expand(cfg: RunConfig) -> list[RunConfig]:
    """One config per (seed, gamma) combination of the sweep."""
    if cfg.sweep is None:
        return [cfg]
    seeds = cfg.sweep.seeds or [cfg.seed]
    gammas = cfg.sweep.gammas or [None]
    out = []
    for s in seeds:
        for g in gammas:
            data = cfg.snapshot()
            data["sweep"] = None
            if s is not None:
                data["seed"] = s
            if g is not None:
                data["params"] = {**data["params"], "gamma": g}
            out.append(parse_config(json.dumps(data)))
    return out


def run(cfg: RunConfig, out_root, threads: int = 1) -> dict:
    """Execute one config; outputs and manifest are moved into place atomically.

    Returns the manifest. Module refusals propagate as exceptions and leave
    nothing behind.
    """
    root = Path(out_root)
    root.mkdir(parents=True, exist_ok=True)
    rid = run_id(cfg)
    final = root / rid
    staging = root / f".tmp-{rid}-{os.getpid()}"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir()
    started = time.time()
    writer = RunWriter(staging)
    try:
        verdict, code = RUNNERS[cfg.experiment](cfg, writer)
        files = {}
        for name in sorted(set(writer.files)):
            path = staging / name
            files[name] = {"sha256": sha256_file(path), "bytes": path.stat().st_size}
        manifest = {
            "run_id": rid,
            "status": "complete",
            "experiment": cfg.experiment,
            "exit_code": code,
            "config": cfg.snapshot(),
            "tool_version": __version__,
            "backend": kernels.BACKEND,
            "threads": threads,
            "started": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
            "wall_seconds": time.time() - started,
            "tolerances": cfg.integrator.model_dump(),
            "verdict": verdict,
            "files": files,
        }
        (staging / MANIFEST).write_bytes(
            (json.dumps(_clean(manifest), indent=2, sort_keys=True) + "\n").encode("utf-8"))
        if final.exists():
            trash = root / f".old-{rid}-{os.getpid()}"
            os.replace(final, trash)
            os.replace(staging, final)
            shutil.rmtree(trash, ignore_errors=True)
        else:
            os.replace(staging, final)
        manifest["path"] = str(final)
        return manifest
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise


def _run_one(args):
    snapshot, out_root = args
    cfg = parse_config(json.dumps(snapshot))
    try:
        man = run(cfg, out_root)
        return {"run_id": man["run_id"], "exit_code": man["exit_code"], "path": man["path"]}
    except Exception as exc:  # reported, not raised, so sibling runs finish
        return {"run_id": run_id(cfg), "exit_code": exit_code_for(exc), "error": str(exc)}


def run_all(cfg: RunConfig, out_root, threads: int = 1) -> list[dict]:
    """Run every expanded config, fanning out to ``threads`` worker processes."""
    cfgs = expand(cfg)
    jobs = [(c.snapshot(), str(out_root)) for c in cfgs]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


def list_runs(out_root) -> list[dict]:
    """Inventory of runs under ``out_root``; problems are reported, never raised."""
    root = Path(out_root)
    if not root.is_dir():
        return []
    entries = []
    for d in sorted(root.iterdir()):
        if not d.is_dir() or d.name.startswith("."):
            continue
        mpath = d / MANIFEST
        entry = {"run": d.name, "status": "ok", "problems": []}
        if not mpath.is_file():
            entry.update(status="incomplete", problems=["no manifest"])
            entries.append(entry)
            continue
        try:
            man = json.loads(mpath.read_text())
            files = man["files"]
            entry["experiment"] = man.get("experiment")
            entry["exit_code"] = man.get("exit_code")
        except (ValueError, KeyError, TypeError) as exc:
            entry.update(status="corrupted", problems=[f"unreadable manifest: {exc}"])
            entries.append(entry)
            continue
        for name, info in sorted(files.items()):
            path = d / name
            if not path.is_file():
                entry["problems"].append(f"missing {name}")
            elif sha256_file(path) != info.get("sha256"):
                entry["problems"].append(f"hash mismatch {name}")
        if entry["problems"]:
            entry["status"] = "corrupted"
        entries.append(entry)
    return entries


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latticefronts",
                                 description="Random transition fronts of lattice competition systems.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", metavar="PATH", help="JSON run configuration")
        sp.add_argument("--out", metavar="DIR", default=None, help="output root (default: runs)")
        sp.add_argument("--seed", metavar="N", type=int, default=None, help="override the medium seed")
        sp.add_argument("--threads", metavar="K", type=int, default=1, help="worker processes for sweeps")
    sp = sub.add_parser("list", help="inventory runs and verify their hashes")
    sp.add_argument("--out", metavar="DIR", default="runs")
    sp.add_argument("--config", metavar="PATH", help=argparse.SUPPRESS)
    sp.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    sp.add_argument("--threads", type=int, default=1, help=argparse.SUPPRESS)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        inv = list_runs(args.out)
        print(json.dumps(inv, indent=2))
        return 0
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.config:
            cfg = load_config(args.config, args.command, args.seed)
        elif args.command == "oracle":
            cfg = parse_config("{}", "oracle", args.seed)
        else:
            raise ConfigError(f"{args.command} needs --config")
        out_root = args.out or cfg.output_dir or "runs"
        results = run_all(cfg, out_root, args.threads)
    except Exception as exc:
        code = exit_code_for(exc)
        if code == 1:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code
    code = 0
    for res in results:
        if "error" in res:
            print(f"error [{res['run_id']}]: {res['error']}", file=sys.stderr)
        else:
            print(res["path"])
        code = code or res["exit_code"]
    return code


if __name__ == "__main__":
    sys.exit(main())
