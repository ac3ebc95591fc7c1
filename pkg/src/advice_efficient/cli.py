"""Batch command line: ``run``, ``sweep`` and ``verify``.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import re
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .errors import AdviceEfficientError, InvariantViolationError
from .harness import (
    ALGORITHMS,
    EnvironmentSpec,
    ExperimentConfig,
    ExperimentResult,
    build_oracle,
    run_repeated,
    sweep_M,
)
from .verify import MAX_ENUMERATION_N, run_verification

log = logging.getLogger("advice_efficient")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_INVARIANT = 3

OUTPUT_DIR_ENV = "ADVICE_EFFICIENT_OUTPUT_DIR"
REGRET_COLUMNS = ("round", "mean_regret", "std_regret", "min", "max", "bound")

_TOP_FIELDS = {"algorithm", "N", "M", "T", "repetitions", "base_seed", "environment"}
_REQUIRED = ("N", "M", "T", "environment")
_ENV_FIELDS = {"kind", "parameters"}


class ConfigError(Exception):
    """Malformed experiment config; the message carries ``path:line:``."""


def _line_of(text: str, key: str) -> int:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    if m is None:
        return 1
    return text.count("\n", 0, m.start()) + 1


def _int_field(raw: dict, key: str, text: str, where: str) -> int:
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}:{_line_of(text, key)}: field {key!r} must be an integer, got {value!r}")
    return value


def parse_config(text: str, where: str = "<config>", base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Parse a JSON experiment config, rejecting unknown and missing fields."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{where}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}:1: config must be a JSON object")
    for key in raw:
        if key not in _TOP_FIELDS:
            raise ConfigError(f"{where}:{_line_of(text, key)}: unknown field {key!r}")
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"{where}:1: missing required field {key!r}")

    env = raw["environment"]
    env_line = _line_of(text, "environment")
    if not isinstance(env, dict):
        raise ConfigError(f"{where}:{env_line}: field 'environment' must be an object")
    for key in env:
        if key not in _ENV_FIELDS:
            raise ConfigError(f"{where}:{_line_of(text, key)}: unknown environment field {key!r}")
    if "kind" not in env:
        raise ConfigError(f"{where}:{env_line}: missing required field 'environment.kind'")
    params = env.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{where}:{_line_of(text, 'parameters')}: 'parameters' must be an object")
    params = dict(params)
    if "path" in params and base_dir is not None:
        params["path"] = str((base_dir / params["path"]).resolve())

    algorithm = raw.get("algorithm", "advice-efficient")
    if algorithm not in ALGORITHMS:
        raise ConfigError(
            f"{where}:{_line_of(text, 'algorithm')}: field 'algorithm' must be one of {ALGORITHMS}"
        )
    values = {k: _int_field(raw, k, text, where) for k in ("N", "M", "T", "repetitions", "base_seed") if k in raw}
    try:
        config = ExperimentConfig(
            environment=EnvironmentSpec(env["kind"], params),
            algorithm=algorithm,
            **values,
        )
    except AdviceEfficientError as exc:
        raise ConfigError(f"{where}:1: {exc}") from None
    try:
        build_oracle(config, None)
    except (AdviceEfficientError, OSError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}:{env_line}: bad environment: {exc}") from None
    return config


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}:0: cannot read config: {exc.strerror}") from None
    return parse_config(text, str(path), path.parent)


def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "algorithm": config.algorithm,
        "N": config.N,
        "M": config.M,
        "T": config.T,
        "repetitions": config.repetitions,
        "base_seed": config.base_seed,
        "environment": {"kind": config.environment.kind, "parameters": dict(config.environment.parameters)},
    }


def _fmt(x: float) -> str:
    return format(float(x), ".15e")


def write_regret_csv(result: ExperimentResult, path: Path) -> None:
    lines = [",".join(REGRET_COLUMNS)]
    for i in range(result.config.T):
        lines.append(
            ",".join(
                [
                    str(i + 1),
                    _fmt(result.mean_regret[i]),
                    _fmt(result.std_regret[i]),
                    _fmt(result.min_regret[i]),
                    _fmt(result.max_regret[i]),
                    _fmt(result.bound[i]),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")


def _write_json(obj: Any, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_manifest(out: Path, config: ExperimentConfig, seeds: list[int], outputs: list[Path], extra: Optional[dict] = None) -> Path:
    manifest = {
        "artifact": "advice-efficient",
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "config": config_to_dict(config),
        "seeds": seeds,
        "outputs": [p.name for p in outputs],
        **(extra or {}),
    }
    path = out / "manifest.json"
    _write_json(manifest, path)
    return path


def _output_dir(arg: Optional[str]) -> Path:
    out = Path(arg or os.environ.get(OUTPUT_DIR_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(config_path: str, output_dir: Optional[str], threads: int = 1) -> int:
    config = load_config(config_path)
    out = _output_dir(output_dir)
    log.info("running N=%d M=%d T=%d R=%d", config.N, config.M, config.T, config.repetitions)
    result = run_repeated(config, workers=threads)
    regret_csv = out / "regret.csv"
    summary_json = out / "summary.json"
    write_regret_csv(result, regret_csv)
    _write_json(result.summary(), summary_json)
    _write_manifest(out, config, result.seeds, [regret_csv, summary_json])
    log.info("final mean regret %.4f, bound %.4f", result.final_mean_regret, result.final_bound)
    return EXIT_OK


def parse_m_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--m: expected comma-separated integers, got {text!r}") from None
    if not values:
        raise ConfigError("--m: no values given")
    return values


def cmd_sweep(config_path: str, M_list: Sequence[int], output_dir: Optional[str], threads: int = 1) -> int:
    config = load_config(config_path)
    for m in M_list:
        if not 1 <= m <= config.N:
            raise ConfigError(f"--m: M={m} outside [1, N={config.N}]")
    out = _output_dir(output_dir)
    results = sweep_M(config, M_list, workers=threads)
    outputs = []
    rows = ["M,final_mean_regret,final_bound"]
    for res in results:
        path = out / f"regret_M{res.config.M}.csv"
        write_regret_csv(res, path)
        outputs.append(path)
        rows.append(f"{res.config.M},{_fmt(res.final_mean_regret)},{_fmt(res.final_bound)}")
        log.info("M=%d final mean regret %.4f, bound %.4f", res.config.M, res.final_mean_regret, res.final_bound)
    combined = out / "sweep_summary.csv"
    combined.write_text("\n".join(rows) + "\n")
    summary = out / "summary.json"
    _write_json([r.summary() for r in results], summary)
    outputs += [combined, summary]
    _write_manifest(out, config, results[0].seeds, outputs, {"M_values": list(M_list)})
    return EXIT_OK


def cmd_verify(max_n: int, output_path: Optional[str], seed: int = 0) -> int:
    if not 2 <= max_n <= MAX_ENUMERATION_N:
        raise ConfigError(f"--max-n must lie in [2, {MAX_ENUMERATION_N}], got {max_n}")
    if output_path is None:
        path = _output_dir(None) / "report.json"
    else:
        path = Path(output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
    results = run_verification(max_n=max_n, seed=seed, progress=log.info)
    passed = all(r.passed for r in results)
    report = {
        "version": __version__,
        "max_n": max_n,
        "seed": seed,
        "passed": passed,
        "checks": [r.to_dict() for r in results],
    }
    _write_json(report, path)
    for r in results:
        log.info("%s %s (max deviation %.3e, threshold %.1e)", "PASS" if r.passed else "FAIL", r.name, r.max_deviation, r.threshold)
    if not passed:
        failed = ", ".join(r.name for r in results if not r.passed)
        print(f"verification failed: {failed}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advice-efficient",
        description="Advice-efficient prediction with expert advice: simulations and oracle checks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="repeat one experiment and write regret curves")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    p_run.add_argument("--threads", type=int, default=1, help="parallel repetitions")

    p_sweep = sub.add_parser("sweep", help="run the same experiment for several M")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--m", required=True, help="comma-separated M values, e.g. 1,2,5,10")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--threads", type=int, default=1)

    p_verify = sub.add_parser("verify", help="run the exact enumeration and bound checks")
    p_verify.add_argument("--max-n", type=int, default=8)
    p_verify.add_argument("--out", default=None, help="report path (default <output dir>/report.json)")
    p_verify.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "run":
            return cmd_run(args.config, args.out, args.threads)
        if args.command == "sweep":
            return cmd_sweep(args.config, parse_m_list(args.m), args.out, args.threads)
        return cmd_verify(args.max_n, args.out, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolationError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except AdviceEfficientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
