"""Experiment harness: JSON specs in, delimited metric rows out.

An ExperimentSpec bundles an environment, shared training
hyperparameters, the agent kinds to compare, seeds, and at most one
swept parameter. `run_experiment` trains every (kind, sweep value,
seed) cell and emits one MetricsRow per evaluation window holding the
cumulative metrics at that point, so the last row of a cell is the
whole-run average and adjacent rows can be differenced for windowed
values.

Sweep parameter paths use the config-file key names: "env.<field>",
"jammer.<field>", "agent.<field>", plus the special "env.D=E" which
sets both capacities at once (the convergence figure uses it).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from .agents import AGENT_KINDS, TrainConfig, train_agent
from .env import EnvConfig, LinkEnv, default_rate_table
from .jammer import JammerConfig

__all__ = [
    "ConfigError",
    "ExperimentSpec",
    "MetricsRow",
    "CSV_HEADER",
    "FIGURES",
    "spec_from_dict",
    "spec_to_dict",
    "load_spec",
    "sweep_defaults",
    "apply_param",
    "run_experiment",
    "emit_csv",
    "parse_csv",
    "group_rows",
    "tail_throughput",
    "tail_packet_loss",
]

CSV_HEADER = "agent,seed,sweep_param,sweep_value,iteration,throughput,packet_loss,pdr,avg_queue,avg_delay"

FIGURES = ("fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11")


class ConfigError(ValueError):
    """Bad experiment configuration; the message names the field."""


@dataclass(frozen=True)
class ExperimentSpec:
    env: EnvConfig
    train: TrainConfig
    kinds: tuple[str, ...] = ("dueling",)
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    eval_window: int = 1000
    sweep: tuple[str, tuple[float, ...]] | None = None
    capacities: tuple[int, ...] | None = None
    out: str | None = None

    def __post_init__(self) -> None:
        for kind in self.kinds:
            if kind not in AGENT_KINDS:
                raise ConfigError(f"agent.type: unknown kind {kind!r}")
        if not self.seeds:
            raise ConfigError("run.seeds: need at least one seed")
        if self.eval_window < 1:
            raise ConfigError("run.eval_window: must be positive")
        if self.sweep is not None and self.capacities is not None:
            raise ConfigError("run: sweep and capacities cannot be combined")
        if self.sweep is not None and not self.sweep[1]:
            raise ConfigError("run.sweep.values: must be non-empty")


@dataclass(frozen=True)
class MetricsRow:
    agent: str
    seed: int
    sweep_param: str
    sweep_value: float | None
    iteration: int
    throughput: float
    packet_loss: float
    pdr: float
    avg_queue: float
    avg_delay: float


# JSON field tables: config-file key -> dataclass field.
_ENV_KEYS = {
    "eta": "eta",
    "lambda": "lam",
    "D": "D",
    "E": "E",
    "t_th": "t_th",
    "d_hat_t": "d_hat_t",
    "e_t": "e_t",
    "d_hat_b": "d_hat_b",
    "e_h": "e_h",
    "e_jam": "e_jam",
    "d_jam": "d_jam",
    "rates": "rates",
    "p_md": "p_md",
    "p_fa": "p_fa",
}
_JAMMER_KEYS = {"powers": "powers", "weights": "weights", "p_avg": "p_avg", "phi": "phi"}
_AGENT_KEYS = {
    "gamma": "gamma",
    "epsilon_start": "epsilon_start",
    "epsilon_end": "epsilon_end",
    "epsilon_decay_steps": "epsilon_decay_steps",
    "batch": "batch",
    "replay_capacity": "replay_capacity",
    "target_sync": "target_sync",
    "sgd_rate": "sgd_rate",
    "hidden": "hidden",
    "iterations": "iterations",
    "tabular_rate_exponent": "tabular_rate_exponent",
    "tabular_iterations": "tabular_iterations",
    "agg": "agg",
}


def _tupled(value):
    if isinstance(value, (list, tuple)):
        return tuple(_tupled(v) for v in value)
    return value


def _section(doc: dict, name: str, keys: dict[str, str]) -> dict:
    raw = doc.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: must be an object")
    out = {}
    for key, value in raw.items():
        if key not in keys:
            raise ConfigError(f"{name}.{key}: unknown key")
        out[keys[key]] = _tupled(value)
    return out


def spec_from_dict(doc: dict) -> ExperimentSpec:
    """Build a spec from a parsed config document. Missing keys default."""
    jammer_kw = _section(doc, "jammer", _JAMMER_KEYS)
    try:
        jam = JammerConfig(**jammer_kw)
    except ValueError as exc:
        raise ConfigError(f"jammer: {exc}") from exc

    env_kw = _section(doc, "env", _ENV_KEYS)
    if env_kw.get("t_th") is None and "t_th" in env_kw:
        env_kw["t_th"] = math.inf
    try:
        env = EnvConfig(jammer=jam, **env_kw)
    except ValueError as exc:
        raise ConfigError(f"env: {exc}") from exc

    agent_raw = doc.get("agent", {})
    if not isinstance(agent_raw, dict):
        raise ConfigError("agent: must be an object")
    kinds = agent_raw.get("type", "dueling")
    if isinstance(kinds, str):
        kinds = (kinds,)
    else:
        kinds = tuple(kinds)
    agent_kw = _section(
        doc, "agent", {**_AGENT_KEYS, "type": "type"}
    )
    agent_kw.pop("type", None)
    try:
        train = TrainConfig(**agent_kw)
    except ValueError as exc:
        raise ConfigError(f"agent: {exc}") from exc

    run_raw = doc.get("run", {})
    if not isinstance(run_raw, dict):
        raise ConfigError("run: must be an object")
    known_run = {"seeds", "eval_window", "sweep", "capacities", "out"}
    for key in run_raw:
        if key not in known_run:
            raise ConfigError(f"run.{key}: unknown key")
    sweep = None
    if run_raw.get("sweep") is not None:
        sw = run_raw["sweep"]
        if not isinstance(sw, dict) or set(sw) != {"param", "values"}:
            raise ConfigError("run.sweep: expected {param, values}")
        sweep = (sw["param"], tuple(sw["values"]))
        _check_param_path(sweep[0])
    capacities = run_raw.get("capacities")
    if capacities is not None:
        capacities = tuple(int(v) for v in capacities)

    return ExperimentSpec(
        env=env,
        train=train,
        kinds=kinds,
        seeds=tuple(int(s) for s in run_raw.get("seeds", (1, 2, 3, 4, 5))),
        eval_window=int(run_raw.get("eval_window", 1000)),
        sweep=sweep,
        capacities=capacities,
        out=run_raw.get("out"),
    )


def spec_to_dict(spec: ExperimentSpec) -> dict:
    """Inverse of spec_from_dict, suitable for json.dump."""
    env = {}
    for key, field in _ENV_KEYS.items():
        value = getattr(spec.env, field)
        if key == "t_th" and math.isinf(value):
            value = None
        env[key] = value
    jammer = {key: getattr(spec.env.jammer, field) for key, field in _JAMMER_KEYS.items()}
    agent = {key: getattr(spec.train, field) for key, field in _AGENT_KEYS.items()}
    agent["type"] = list(spec.kinds)
    run = {"seeds": list(spec.seeds), "eval_window": spec.eval_window}
    if spec.sweep is not None:
        run["sweep"] = {"param": spec.sweep[0], "values": list(spec.sweep[1])}
    if spec.capacities is not None:
        run["capacities"] = list(spec.capacities)
    if spec.out is not None:
        run["out"] = spec.out
    return {"env": env, "jammer": jammer, "agent": agent, "run": run}


def load_spec(path: str) -> ExperimentSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return spec_from_dict(doc)


def _check_param_path(path: str) -> None:
    if path == "env.D=E":
        return
    section, _, key = path.partition(".")
    table = {"env": _ENV_KEYS, "jammer": _JAMMER_KEYS, "agent": _AGENT_KEYS}.get(section)
    if table is None or key not in table:
        raise ConfigError(f"sweep param {path!r} not recognized")


def apply_param(env: EnvConfig, train: TrainConfig, path: str, value):
    """Return (env, train) with one swept parameter replaced."""
    _check_param_path(path)
    if path == "env.D=E":
        return dataclasses.replace(env, D=int(value), E=int(value)), train
    section, _, key = path.partition(".")
    if section == "env":
        return dataclasses.replace(env, **{_ENV_KEYS[key]: _tupled(value)}), train
    if section == "jammer":
        jam = dataclasses.replace(env.jammer, **{_JAMMER_KEYS[key]: _tupled(value)})
        return dataclasses.replace(env, jammer=jam), train
    return env, dataclasses.replace(train, **{_AGENT_KEYS[key]: value})


def sweep_defaults(figure: str, base: ExperimentSpec | None = None) -> ExperimentSpec:
    """Preset comparison for one report figure, on top of `base` or defaults.

    fig5   budget sweep, scripted rate adaptation vs the dueling learner
    fig6   ambient idle probability sweep, htt / wtj / dueling
    fig7   budget sweep, htt / wtj / dueling
    fig8   clear-channel transmit rate sweep, htt / wtj / dueling
    fig9   arrival rate sweep, htt / wtj / dueling
    fig10  latency threshold sweep, htt / wtj / dueling
    fig11  no sweep, queue and store capacities 10 and 20, all learners;
           the tabular run gets a 10^6-slot budget (with the epsilon ramp
           stretched to match) since it needs far more samples, and the
           comparison reads every curve at the common iteration marks
    """
    if base is None:
        base = ExperimentSpec(env=EnvConfig(), train=TrainConfig())
    budgets = tuple(float(v) for v in range(1, 8))
    presets = {
        "fig5": (("fixed_ra", "dueling"), ("jammer.p_avg", budgets), None),
        "fig6": (("htt", "wtj", "dueling"), ("env.eta", (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)), None),
        "fig7": (("htt", "wtj", "dueling"), ("jammer.p_avg", budgets), None),
        "fig8": (("htt", "wtj", "dueling"), ("env.d_hat_t", tuple(range(1, 11))), None),
        "fig9": (("htt", "wtj", "dueling"), ("env.lambda", (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)), None),
        "fig10": (("htt", "wtj", "dueling"), ("env.t_th", tuple(range(1, 7))), None),
        "fig11": (("tabular", "deep_q", "dueling"), None, (10, 20)),
    }
    if figure not in presets:
        raise ConfigError(f"figure must be one of {', '.join(FIGURES)}")
    kinds, sweep, capacities = presets[figure]
    train = base.train
    if figure == "fig11" and train.tabular_iterations is None:
        train = dataclasses.replace(train, tabular_iterations=1_000_000)
    return dataclasses.replace(
        base, kinds=kinds, sweep=sweep, capacities=capacities, train=train
    )


def _cells(spec: ExperimentSpec):
    if spec.capacities is not None:
        variants = [("env.D=E", float(v)) for v in spec.capacities]
    elif spec.sweep is not None:
        param, values = spec.sweep
        variants = [(param, v) for v in values]
    else:
        variants = [("", None)]
    for kind in spec.kinds:
        for vi, (param, value) in enumerate(variants):
            for seed in spec.seeds:
                yield kind, vi, param, value, seed


def _run_cell(spec: ExperimentSpec, kind: str, vi: int, param: str, value, seed: int):
    env_cfg, train_cfg = spec.env, spec.train
    if param:
        env_cfg, train_cfg = apply_param(env_cfg, train_cfg, param, value)
    env_ss, agent_ss = np.random.SeedSequence([seed, vi]).spawn(2)
    env = LinkEnv(env_cfg, np.random.default_rng(env_ss))
    result = train_agent(env, kind, train_cfg, np.random.default_rng(agent_ss), spec.eval_window)
    rows = []
    for iteration, m in result.snapshots:
        rows.append(
            MetricsRow(
                agent=kind,
                seed=seed,
                sweep_param=param,
                sweep_value=value,
                iteration=iteration,
                throughput=m.throughput,
                packet_loss=m.packet_loss,
                pdr=m.pdr,
                avg_queue=m.avg_queue,
                avg_delay=m.avg_delay,
            )
        )
    return rows


def run_experiment(spec: ExperimentSpec, workers: int = 1, log=None) -> list[MetricsRow]:
    """Train every cell in deterministic order and return all rows.

    On a per-cell failure, rows collected so far are flushed to
    spec.out (when set) before the error propagates.
    """
    rows: list[MetricsRow] = []
    cells = list(_cells(spec))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, spec, *cell) for cell in cells]
            for cell, fut in zip(cells, futures):
                try:
                    rows.extend(fut.result())
                except Exception as exc:
                    if spec.out:
                        emit_csv(rows, spec.out)
                    raise RuntimeError(f"cell {cell} failed: {exc}") from exc
                if log:
                    log(f"done {cell}")
        return rows
    for cell in cells:
        try:
            rows.extend(_run_cell(spec, *cell))
        except ConfigError:
            raise
        except Exception as exc:
            if spec.out:
                emit_csv(rows, spec.out)
            raise RuntimeError(f"cell {cell} failed: {exc}") from exc
        if log:
            log(f"done {cell}")
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def emit_csv(rows: list[MetricsRow], path: str) -> None:
    """Write rows with the fixed header; floats carry 6 significant digits."""
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            fh.write(
                ",".join(
                    (
                        r.agent,
                        str(r.seed),
                        r.sweep_param,
                        _fmt(r.sweep_value),
                        str(r.iteration),
                        _fmt(r.throughput),
                        _fmt(r.packet_loss),
                        _fmt(r.pdr),
                        _fmt(r.avg_queue),
                        _fmt(r.avg_delay),
                    )
                )
                + "\n"
            )


def parse_csv(path: str) -> list[MetricsRow]:
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ConfigError(f"{path}: unexpected header {header!r}")
        rows = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            rows.append(
                MetricsRow(
                    agent=parts[0],
                    seed=int(parts[1]),
                    sweep_param=parts[2],
                    sweep_value=float(parts[3]) if parts[3] else None,
                    iteration=int(parts[4]),
                    throughput=float(parts[5]),
                    packet_loss=float(parts[6]),
                    pdr=float(parts[7]),
                    avg_queue=float(parts[8]),
                    avg_delay=float(parts[9]),
                )
            )
    return rows


def group_rows(rows: list[MetricsRow]) -> dict:
    """Rows per (agent, sweep_value, seed), each sorted by iteration."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.agent, r.sweep_value, r.seed), []).append(r)
    for key in groups:
        groups[key].sort(key=lambda r: r.iteration)
    return groups


def _tail_rate(cell_rows: list[MetricsRow], attr: str, windows: int) -> float:
    """Per-slot rate of a cumulative metric over the last `windows` rows."""
    last = cell_rows[-1]
    base_idx = max(0, len(cell_rows) - 1 - windows)
    if base_idx == len(cell_rows) - 1:
        return getattr(last, attr)
    base = cell_rows[base_idx]
    span = last.iteration - base.iteration
    total = getattr(last, attr) * last.iteration - getattr(base, attr) * base.iteration
    return total / span


def tail_throughput(cell_rows: list[MetricsRow], windows: int = 4) -> float:
    """Delivered packets per slot over the closing evaluation windows."""
    return _tail_rate(cell_rows, "throughput", windows)


def tail_packet_loss(cell_rows: list[MetricsRow], windows: int = 4) -> float:
    """Lost packets per slot over the closing evaluation windows."""
    return _tail_rate(cell_rows, "packet_loss", windows)
