"""Command-line entry point: ``roster-lab {run,compare,verify}``.

Exit codes: 0 success, 1 usage or input error, 2 invariant violation.
"""
from __future__ import annotations

import argparse
import logging
import sys
import typing
from dataclasses import fields, replace
from pathlib import Path

from roster_lab import kernels
from roster_lab.harness import (
    COMPARE_STRATEGIES,
    ExperimentConfig,
    InvariantViolation,
    emit_outputs,
    run_experiment,
)

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2
DEFAULT_ALPHAS = (0.25, 0.5, 0.75, 1.0)

# short flags for the most used knobs; every field also gets --field-name
ALIASES = {
    "system_strategy": "--system",
    "driver_strategy": "--driver",
    "max_stages": "--stages",
    "n_interactions": "--interactions",
    "n_runs": "--runs",
}
CHOICES = {
    "system_strategy": ("roster", "tasr", "llf"),
    "driver_strategy": ("sampled", "sr", "fc", "ar"),
    "discount": ("eq3", "example"),
    "driver_rate_rule": ("magnitude", "clamp"),
    "fc_system": ("optimal", "roster", "tasr", "llf"),
    "ar_system": ("optimal", "roster", "tasr", "llf"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _converter(name: str):
    hint = typing.get_type_hints(ExperimentConfig)[name]
    base = next((t for t in typing.get_args(hint) if t is not type(None)), hint)
    optional = type(None) in typing.get_args(hint)
    conv = _parse_bool if base is bool else base

    def convert(text: str):
        if optional and text.strip().lower() in ("", "none"):
            return None
        try:
            return conv(text.strip())
        except ValueError:
            raise ValueError(f"{name}: cannot parse {text!r} as {base.__name__}") from None

    return convert


def read_config_file(path) -> dict:
    """``key=value`` lines; ``#`` starts a comment; keys are ExperimentConfig field names."""
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _converter(key)(value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from None
    return values


def _add_config_flags(p: argparse.ArgumentParser, skip=()):
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    for f in fields(ExperimentConfig):
        if f.name in skip:
            continue
        names = [f"--{f.name.replace('_', '-')}"]
        if f.name in ALIASES:
            names.insert(0, ALIASES[f.name])
        conv = _converter(f.name)

        def typed(text, conv=conv):
            try:
                return conv(text)
            except ValueError as exc:
                raise argparse.ArgumentTypeError(str(exc)) from None

        p.add_argument(*names, dest=f.name, type=typed, default=argparse.SUPPRESS,
                       choices=CHOICES.get(f.name), metavar=f.name.upper() if f.name not in CHOICES else None,
                       help=f"default: {f.default!r}")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="roster-lab", description="Trust-aware multi-stage route recommendation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    run = sub.add_parser("run", help="simulate one strategy (plus the FC and SR baselines)")
    _add_config_flags(run)

    cmp_ = sub.add_parser("compare", help="all six strategies on matched seeds")
    _add_config_flags(cmp_, skip=("system_strategy", "driver_strategy", "alpha0"))
    cmp_.add_argument("--alphas", default=",".join(str(a) for a in DEFAULT_ALPHAS),
                      help="comma-separated initial trust values")

    ver = sub.add_parser("verify", help="oracle equivalence and invariant checks")
    ver.add_argument("--instances", type=int, default=100, help="random oracle instances")
    ver.add_argument("--seed", type=int, default=0)
    return parser


def _config(ns: argparse.Namespace) -> ExperimentConfig:
    values = read_config_file(ns.config) if getattr(ns, "config", None) else {}
    for f in fields(ExperimentConfig):
        if f.name in ns:
            values[f.name] = getattr(ns, f.name)
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _parse_alphas(text: str) -> list[float]:
    try:
        alphas = [float(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise UsageError(f"--alphas: cannot parse {text!r}") from None
    if not alphas or any(not 0 < a <= 1 for a in alphas):
        raise UsageError("--alphas values must lie in (0, 1]")
    return alphas


def table(summary: list[dict]) -> str:
    """Rows by initial trust, one column per strategy: congestion (travel time) in hours."""
    strategies = [s for s in COMPARE_STRATEGIES if any(r["strategy"] == s for r in summary)]
    cells = {(r["alpha0"], r["strategy"]): r for r in summary}
    lines = ["alpha0  " + "  ".join(f"{s:>26}" for s in strategies)]
    for a in sorted({r["alpha0"] for r in summary}):
        parts = []
        for s in strategies:
            r = cells.get((a, s))
            parts.append(f"{r['mean_congestion_h']:.8f} ({r['mean_travel_time_h']:.5f})" if r else " " * 26)
        lines.append(f"{a:<6g}  " + "  ".join(f"{p:>26}" for p in parts))
    return "\n".join(lines)


def _cmd_run(ns) -> int:
    config = _config(ns)
    result = run_experiment(config, workers=ns.workers)
    files = emit_outputs(result, config.out)
    for row in result.summary:
        print(f"{row['strategy']:>7} congestion={row['mean_congestion_h']:.8f} h "
              f"ratio={row['congestion_ratio']:.8f} travel={row['mean_travel_time_h']:.6f} h "
              f"ratio={row['travel_time_ratio']:.6f}")
    print(f"wrote {len(files)} files to {config.out}")
    return EXIT_OK


def _cmd_compare(ns) -> int:
    config = _config(ns)
    alphas = _parse_alphas(ns.alphas)
    result = run_experiment(config, strategies=COMPARE_STRATEGIES, alphas=alphas, workers=ns.workers)
    files = emit_outputs(result, config.out)
    print(table(result.summary))
    print(f"wrote {len(files)} files to {config.out}")
    return EXIT_OK


def _cmd_verify(ns) -> int:
    from roster_lab import verify

    print(f"kernel backend: {kernels.BACKEND}")
    failed = False
    checks = [
        ("oracle", lambda: verify.check_oracle(ns.instances, ns.seed)),
        ("backends", lambda: verify.check_backends(seed=ns.seed)),
        ("invariants", lambda: verify.check_invariants(seed=ns.seed)),
    ]
    for name, check in checks:
        problems = check()
        print(f"{name}: {'ok' if not problems else 'FAILED'}")
        for msg in problems[:10]:
            print(f"  {msg}")
        failed |= bool(problems)
    return EXIT_INVARIANT if failed else EXIT_OK


COMMANDS = {"run": _cmd_run, "compare": _cmd_compare, "verify": _cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(message)s")
        return COMMANDS[ns.command](ns)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
