"""Command-line entry point: run experiments, dump convergence curves, selftest.

Configs are JSON with SI units (watts, hertz, meters); any omitted key takes
the documented default, unknown keys are rejected. Outputs are CSV (default)
or JSON arrays with columns iteration, avg_rate_bps, violation_prob,
lagrangian, multiplier_norm, byte-identical across reruns of the same config.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

from .envs import PowerControlConfig, UserAssocConfig
from .harness import ConfigError, ExperimentConfig, run_experiment, with_seed
from .selftest import run_selftest

CSV_COLUMNS = ("iteration", "avg_rate_bps", "violation_prob", "lagrangian", "multiplier_norm")

_TOP_KEYS = {
    "problem": str,
    "algorithm": str,
    "seed": int,
    "iterations": int,
    "batch_size": int,
    "eval_every": int,
    "eval_samples": int,
    "eval_mode": str,
    "hidden_sizes": list,
    "value_hidden_sizes": (list, type(None)),
    "lr_base": (int, float),
    "lr_decay": (int, float),
    "noise_sigma0": (int, float, type(None)),
    "noise_decay": (int, float),
    "baseline": str,
    "env": dict,
}

_ENV_KEYS = {
    "user-assoc": {
        "num_bs": int,
        "num_users": int,
        "capacity": int,
        "inter_bs_distance_m": (int, float),
        "bs_road_offset_m": (int, float),
        "tx_power_w": (int, float),
        "bandwidth_hz": (int, float),
        "noise_figure_db": (int, float),
        "noise_psd_dbm_hz": (int, float),
        "rayleigh_fading": bool,
    },
    "power-control": {
        "avg_power_budget_w": (int, float),
        "mean_channel_gain": (int, float),
        "noise_power_w": (int, float),
    },
}

_ENV_FIELD_BY_KEY = {
    "inter_bs_distance_m": "inter_bs_distance",
    "bs_road_offset_m": "bs_road_offset",
    "tx_power_w": "tx_power",
    "bandwidth_hz": "bandwidth",
    "avg_power_budget_w": "avg_power_budget",
    "noise_power_w": "noise_power",
}


def _typecheck(key, value, expected):
    if isinstance(value, bool) and expected is not bool and bool not in np_tuple(expected):
        raise ConfigError(f"{key}: expected {expected}, got boolean")
    if not isinstance(value, expected):
        raise ConfigError(f"{key}: expected {getattr(expected, '__name__', expected)}, got {value!r}")


def np_tuple(expected):
    return expected if isinstance(expected, tuple) else (expected,)


def parse_config(path) -> ExperimentConfig:
    """Load and fully validate a JSON experiment config; {} means all defaults."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    for key in raw:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown config key: {key!r}")
    for key, expected in _TOP_KEYS.items():
        if key in raw:
            _typecheck(key, raw[key], expected)
    problem = raw.get("problem", "user-assoc")
    env_raw = raw.pop("env", {})
    if problem not in _ENV_KEYS:
        raise ConfigError(f"problem: must be one of {tuple(_ENV_KEYS)}, got {problem!r}")
    allowed = _ENV_KEYS[problem]
    fields = {}
    for key, value in env_raw.items():
        if key not in allowed:
            raise ConfigError(f"unknown env key for {problem}: {key!r}")
        _typecheck(f"env.{key}", value, allowed[key])
        fields[_ENV_FIELD_BY_KEY.get(key, key)] = value
    try:
        env = (UserAssocConfig if problem == "user-assoc" else PowerControlConfig)(**fields)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for key in ("hidden_sizes", "value_hidden_sizes"):
        if raw.get(key) is not None:
            raw[key] = tuple(raw[key])
    config = ExperimentConfig(env=env, **raw)
    config.validate()
    return config


def _float_repr(value) -> str:
    return repr(float(value))


def records_to_rows(records):
    return [
        {
            "iteration": r.iteration,
            "avg_rate_bps": float(r.avg_rate),
            "violation_prob": float(r.violation_prob),
            "lagrangian": float(r.lagrangian),
            "multiplier_norm": float(r.multiplier_norm),
        }
        for r in records
    ]


def write_records(records, path, fmt):
    rows = records_to_rows(records)
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for row in rows:
            lines.append(
                ",".join(
                    str(row["iteration"]) if c == "iteration" else _float_repr(row[c])
                    for c in CSV_COLUMNS
                )
            )
        payload = "\n".join(lines) + "\n"
    else:
        payload = json.dumps(rows, indent=2) + "\n"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(payload)


def _load_run_config(args, forced_algorithm=None) -> ExperimentConfig:
    if args.config is not None:
        config = parse_config(args.config)
    else:
        config = config_from_dict({})
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if forced_algorithm is not None:
        overrides["algorithm"] = forced_algorithm
    elif getattr(args, "algo", None) is not None:
        overrides["algorithm"] = args.algo
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
        config.validate()
    return config


def _cmd_run(args, forced_algorithm=None) -> int:
    config = _load_run_config(args, forced_algorithm)
    result = run_experiment(config)
    if args.out:
        write_records(result.records, args.out, args.format)
    summary = (
        f"algorithm={config.algorithm} seed={config.seed} iterations={config.iterations} "
        f"final_rate={result.final_rate:.6g} final_violation={result.final_violation:.4f}"
        + (" DIVERGED" if result.diverged else "")
    )
    print(summary)
    return 1 if result.diverged else 0


def _cmd_sweep(args) -> int:
    config = parse_config(args.config)
    seeds = [int(s) for s in args.seeds.split(",")]
    os.makedirs(args.out_dir, exist_ok=True)
    workers = args.workers or min(len(seeds), os.cpu_count() or 1)

    def one(seed):
        result = run_experiment(with_seed(config, seed))
        out = os.path.join(args.out_dir, f"{config.problem}_{config.algorithm}_seed{seed}.{args.format}")
        write_records(result.records, out, args.format)
        return seed, result

    failures = 0
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        for seed, result in pool.map(one, seeds):
            status = "DIVERGED" if result.diverged else f"final_rate={result.final_rate:.6g}"
            print(f"seed {seed}: {status}")
            failures += int(result.diverged)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdlearn", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_io(p, config_required):
        p.add_argument("--config", required=config_required, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="metric output path")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    run_p = sub.add_parser("run", help="train per config and write convergence metrics")
    add_io(run_p, config_required=True)
    run_p.add_argument(
        "--algo",
        choices=("model-based", "model-free-det", "model-free-sto", "supervised", "oracle"),
        default=None,
        help="override config algorithm",
    )

    oracle_p = sub.add_parser("oracle", help="run the exact oracle on the configured problem")
    add_io(oracle_p, config_required=False)

    sub.add_parser("selftest", help="gradient/estimator/oracle verification suite")

    sweep_p = sub.add_parser("sweep", help="run one config across several seeds")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated seed list")
    sweep_p.add_argument("--out-dir", required=True)
    sweep_p.add_argument("--format", choices=("csv", "json"), default="csv")
    sweep_p.add_argument("--workers", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.subcommand == "run":
            return _cmd_run(args)
        if args.subcommand == "oracle":
            return _cmd_run(args, forced_algorithm="oracle")
        if args.subcommand == "selftest":
            return 0 if run_selftest() else 1
        return _cmd_sweep(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
