"""Command-line front end: nets, sketch checks, experiments, and scans.

Subcommands::

    netsketch net build CONFIG        build a covering net from a class config
    netsketch jl check CONFIG         empirical all-pairs distortion check
    netsketch experiment run CONFIG   seeded reconstruction experiment
    netsketch entropy scan CONFIG     entropy growth across resolutions
    netsketch tailfit CONFIG          fit and validate a tail-decay model

Every subcommand reads a flat ``key = value`` config file and accepts
``--seed`` (overrides the config's seed) and ``--out`` (output path, or path
prefix where a subcommand writes both a CSV and a JSON file).  Exit status is
0 on success, 1 on a usage error, and 2 on an internal failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .errors import NetSketchError, UsageError
from .experiment import (
    _CLASS_SCHEMAS,
    _as_choice,
    _as_dims,
    _as_float,
    _as_int,
    build_family,
    load_experiment_config,
    parse_flat_config,
    run_experiment,
    write_summary_json,
    write_trials_csv,
)
from .function_classes import count_tail_violations, fit_class_tail_model
from .hilbert import DEFAULT_AMBIENT_DIM
from .jl import DEFAULT_JL_CONSTANT, distortion_ok, random_subspace, required_measurements
from .nets import DEFAULT_NET_BUDGET, build_net, write_net
from .entropy import fit_growth

__all__ = ["main"]

_SEED_RANGE = 2**63 - 1


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports bad invocations as usage errors."""

    def error(self, message: str) -> None:  # noqa: D401 - argparse hook
        raise UsageError(message)


def _exact_int_str(value: int) -> str:
    """Decimal form of an exact count; covering numbers can exceed the
    interpreter's default digit cap for int-to-str conversion."""
    if hasattr(sys, "set_int_max_str_digits"):
        previous = sys.get_int_max_str_digits()
        try:
            sys.set_int_max_str_digits(0)
            return str(value)
        finally:
            sys.set_int_max_str_digits(previous)
    return str(value)


# ---------------------------------------------------------------------------
# Config plumbing shared by the non-experiment subcommands
# ---------------------------------------------------------------------------


def _read_config(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as stream:
            return stream.read()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc}") from exc


def _load_config(
    path: str,
    schema: Mapping[str, Callable[[str], Any]],
    required: Sequence[str],
    *,
    with_class: bool,
) -> tuple[Any, dict[str, Any]]:
    """Parse a flat config against ``schema``; returns (family, values)."""
    raw = parse_flat_config(_read_config(path))
    family = build_family(raw) if with_class else None
    allowed = set(schema)
    if with_class:
        allowed |= {"class", *_CLASS_SCHEMAS[raw["class"]]}
    unknown = sorted(key for key in raw if key not in allowed)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    missing = sorted(key for key in required if key not in raw)
    if missing:
        raise UsageError(f"config is missing required keys: {', '.join(missing)}")
    values = {key: schema[key](raw[key]) for key in schema if key in raw}
    return family, values


def _resolve_seed(values: Mapping[str, Any], override: int | None) -> int:
    seed = override if override is not None else values.get("seed")
    if seed is None:
        raise UsageError("config needs a 'seed' key (or pass --seed)")
    if seed < 0:
        raise UsageError(f"seed must be non-negative, got {seed!r}")
    return int(seed)


def _as_float_list(key: str) -> Callable[[str], tuple[float, ...]]:
    def parse(value: str) -> tuple[float, ...]:
        try:
            parts = tuple(
                float(part.strip()) for part in value.split(",") if part.strip()
            )
        except ValueError:
            raise UsageError(f"config key {key!r} needs numbers, got {value!r}")
        if not parts:
            raise UsageError(f"config key {key!r} must list at least one value")
        return parts

    return parse


def _as_net_budget(value: str) -> float:
    if value == "inf":
        return float("inf")
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"config key 'm_max' needs an integer or 'inf', got {value!r}")


# ---------------------------------------------------------------------------
# net build
# ---------------------------------------------------------------------------

_NET_SCHEMA: dict[str, Callable[[str], Any]] = {
    "eps1": _as_float("eps1"),
    "mode": _as_choice("mode", ("auto", "counted", "materialized", "factored")),
    "m_max": _as_net_budget,
    "ambient_dim": _as_int("ambient_dim"),
}


def _cmd_net_build(args: argparse.Namespace) -> int:
    family, values = _load_config(args.config, _NET_SCHEMA, ("eps1",), with_class=True)
    net = build_net(
        family,
        values["eps1"],
        mode=values.get("mode", "auto"),
        m_max=values.get("m_max", DEFAULT_NET_BUDGET),
    )
    print(
        f"net: class={family.spec_string()} eps1={net.eps1!r} mode={net.mode} "
        f"size={_exact_int_str(net.size)} entropy_bits={net.entropy_bits!r}"
    )
    if args.out is not None:
        ambient_dim = values.get("ambient_dim", DEFAULT_AMBIENT_DIM)
        write_net(args.out, net, ambient_dim)
        print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# jl check
# ---------------------------------------------------------------------------

_JL_SCHEMA: dict[str, Callable[[str], Any]] = {
    "d": _as_int("d"),
    "m": _as_int("m"),
    "p": _as_float("p"),
    "seeds": _as_int("seeds"),
    "jl_constant": _as_float("jl_constant"),
    "seed": _as_int("seed"),
}


def run_jl_check(
    d: int,
    m: int,
    p: float,
    draws: int,
    seed: int,
    jl_constant: float = DEFAULT_JL_CONSTANT,
) -> dict[str, Any]:
    """Draw random subspaces and count how often all pairwise ratios land
    in the [1/2, 2] distortion band for ``m`` random unit vectors."""
    if d < 1:
        raise UsageError(f"ambient dimension must be positive, got {d!r}")
    if m < 2:
        raise UsageError(f"need at least two points, got {m!r}")
    if draws < 1:
        raise UsageError(f"draw count must be positive, got {draws!r}")
    n = required_measurements(p, m, jl_constant)
    if n > d:
        raise UsageError(
            f"measurement count {n} exceeds the ambient dimension {d}; "
            "raise d or lower the point count"
        )
    successes = 0
    for draw in range(draws):
        point_rng = np.random.default_rng([seed, 1, draw])
        points = point_rng.normal(size=(m, d))
        points /= np.linalg.norm(points, axis=1, keepdims=True)
        op_seed = int(np.random.default_rng([seed, 2, draw]).integers(_SEED_RANGE))
        operator = random_subspace(d, n, seed=op_seed)
        report = distortion_ok(operator, points)
        successes += bool(report.ok)
    return {
        "d": d,
        "m": m,
        "p": p,
        "n": n,
        "jl_constant": jl_constant,
        "draws": draws,
        "seed": seed,
        "successes": successes,
        "success_fraction": successes / draws,
        "lower": 0.5,
        "upper": 2.0,
    }


def _cmd_jl_check(args: argparse.Namespace) -> int:
    _, values = _load_config(args.config, _JL_SCHEMA, (), with_class=False)
    report = run_jl_check(
        d=values.get("d", 512),
        m=values.get("m", 64),
        p=values.get("p", 0.5),
        draws=values.get("seeds", 200),
        seed=_resolve_seed(values, args.seed),
        jl_constant=values.get("jl_constant", DEFAULT_JL_CONSTANT),
    )
    print(
        f"jl check: d={report['d']} m={report['m']} n={report['n']} "
        f"all-pairs distortion within [1/2, 2] in {report['successes']}/"
        f"{report['draws']} draws (fraction {report['success_fraction']!r})"
    )
    if args.out is not None:
        write_summary_json(args.out, report)
        print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# experiment run
# ---------------------------------------------------------------------------


def _cmd_experiment_run(args: argparse.Namespace) -> int:
    config = load_experiment_config(
        _read_config(args.config), seed_override=args.seed
    )
    if args.out is not None:
        config = dataclasses.replace(
            config, csv_out=f"{args.out}.csv", json_out=f"{args.out}.json"
        )
    result = run_experiment(config, jobs=args.jobs)
    summary = result.summary
    print(
        f"experiment: class={summary['class']} mode={summary['mode']} "
        f"eps={summary['eps']!r} d={summary['d']} n={summary['n']} "
        f"M={summary['net_size']} clamped={summary['clamped']}"
    )
    print(
        f"success {summary['success_count']}/{summary['trials']} "
        f"(rate {summary['success_rate']!r}, "
        f"95% CI [{summary['success_ci'][0]!r}, {summary['success_ci'][1]!r}])"
    )
    if config.csv_out is not None:
        write_trials_csv(config.csv_out, result.rows)
        print(f"wrote {config.csv_out}")
    if config.json_out is not None:
        write_summary_json(config.json_out, summary)
        print(f"wrote {config.json_out}")
    return 0


# ---------------------------------------------------------------------------
# entropy scan
# ---------------------------------------------------------------------------

_ENTROPY_SCHEMA: dict[str, Callable[[str], Any]] = {
    "eps_values": _as_float_list("eps_values"),
    "model": _as_choice("model", ("power", "logsquare")),
}


def _cmd_entropy_scan(args: argparse.Namespace) -> int:
    family, values = _load_config(
        args.config, _ENTROPY_SCHEMA, ("eps_values", "model"), with_class=True
    )
    eps_values = values["eps_values"]
    nets = [build_net(family, eps, mode="counted") for eps in eps_values]
    # Exact covering numbers as decimal strings: they routinely outgrow both
    # the int-to-str digit cap and what a JSON number can round-trip.
    sizes = [_exact_int_str(net.size) for net in nets]
    entropy_bits = [net.entropy_bits for net in nets]
    scan = fit_growth(eps_values, entropy_bits, values["model"])
    params = " ".join(
        f"{name}={value!r}" for name, value in sorted(scan.fit_params.items())
    )
    print(
        f"entropy scan: class={family.spec_string()} model={scan.model} "
        f"{params} r_squared={scan.r_squared!r}"
    )
    if args.out is not None:
        csv_path = f"{args.out}.csv"
        rows = [
            (repr(float(eps)), size, repr(float(bits)))
            for eps, size, bits in zip(eps_values, sizes, entropy_bits)
        ]
        with open(csv_path, "w", encoding="utf-8", newline="") as stream:
            stream.write("eps,M,H\n")
            for row in rows:
                stream.write(",".join(row) + "\n")
        report = {
            "class": family.spec_string(),
            "model": scan.model,
            "eps_values": list(eps_values),
            "net_sizes": sizes,
            "entropy_bits": entropy_bits,
            "fit_params": scan.fit_params,
            "r_squared": scan.r_squared,
            "non_monotone": scan.non_monotone,
        }
        write_summary_json(f"{args.out}.json", report)
        print(f"wrote {csv_path}")
        print(f"wrote {args.out}.json")
    return 0


# ---------------------------------------------------------------------------
# tailfit
# ---------------------------------------------------------------------------

_TAILFIT_SCHEMA: dict[str, Callable[[str], Any]] = {
    "tail_samples": _as_int("tail_samples"),
    "tail_dims": _as_dims,
    "validation_samples": _as_int("validation_samples"),
    "ambient_dim": _as_int("ambient_dim"),
    "reference_beta": _as_float("reference_beta"),
    "seed": _as_int("seed"),
}


def run_tailfit(
    family,
    seed: int,
    *,
    tail_samples: int = 40,
    tail_dims: Sequence[int] = (64, 128, 256, 512, 1024),
    validation_samples: int = 100,
    ambient_dim: int = DEFAULT_AMBIENT_DIM,
    reference_beta: float = 1.0,
) -> dict[str, Any]:
    """Fit a tail-decay model, then validate the bound on fresh samples."""
    if validation_samples < 1:
        raise UsageError(
            f"validation_samples must be >= 1, got {validation_samples!r}"
        )
    fit_rng = np.random.default_rng([seed, 1])
    model = fit_class_tail_model(family, tail_samples, tail_dims, fit_rng, ambient_dim)
    validation_rng = np.random.default_rng([seed, 2])
    validation = [
        family.to_signal(family.sample(validation_rng, ambient_dim), ambient_dim)
        for _ in range(validation_samples)
    ]
    violations = count_tail_violations(model, validation, tail_dims)
    return {
        "class": family.spec_string(),
        "seed": seed,
        "tail_samples": tail_samples,
        "tail_dims": list(tail_dims),
        "validation_samples": validation_samples,
        "ambient_dim": ambient_dim,
        "constant": model.constant,
        "norm_bound": model.norm_bound,
        "fitted_beta": model.decay_exponent,
        "reference_beta": reference_beta,
        "beta_discrepancy": model.decay_exponent - reference_beta,
        "violations": violations,
        "checks": validation_samples * len(tail_dims),
    }


def _cmd_tailfit(args: argparse.Namespace) -> int:
    family, values = _load_config(args.config, _TAILFIT_SCHEMA, (), with_class=True)
    report = run_tailfit(
        family,
        _resolve_seed(values, args.seed),
        tail_samples=values.get("tail_samples", 40),
        tail_dims=values.get("tail_dims", (64, 128, 256, 512, 1024)),
        validation_samples=values.get("validation_samples", 100),
        ambient_dim=values.get("ambient_dim", DEFAULT_AMBIENT_DIM),
        reference_beta=values.get("reference_beta", 1.0),
    )
    print(
        f"tailfit: class={report['class']} fitted_beta={report['fitted_beta']!r} "
        f"reference_beta={report['reference_beta']!r} "
        f"discrepancy={report['beta_discrepancy']!r}"
    )
    print(f"violations {report['violations']}/{report['checks']} checks")
    if args.out is not None:
        write_summary_json(args.out, report)
        print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser assembly and entry point
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="flat key=value config file")
    parser.add_argument(
        "--seed", type=int, default=None, help="override the config's master seed"
    )
    parser.add_argument(
        "--out", default=None, help="output path (or path prefix for CSV+JSON pairs)"
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="netsketch",
        description="Covering nets, random sketches, and reconstruction experiments.",
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    net = commands.add_parser("net", help="covering-net construction")
    net_sub = net.add_subparsers(dest="subcommand", required=True, metavar="subcommand")
    net_build = net_sub.add_parser("build", help="build a net from a class config")
    _add_common(net_build)
    net_build.set_defaults(handler=_cmd_net_build)

    jl = commands.add_parser("jl", help="random-projection diagnostics")
    jl_sub = jl.add_subparsers(dest="subcommand", required=True, metavar="subcommand")
    jl_check = jl_sub.add_parser("check", help="empirical pairwise distortion check")
    _add_common(jl_check)
    jl_check.set_defaults(handler=_cmd_jl_check)

    experiment = commands.add_parser("experiment", help="reconstruction experiments")
    experiment_sub = experiment.add_subparsers(
        dest="subcommand", required=True, metavar="subcommand"
    )
    experiment_run = experiment_sub.add_parser("run", help="run a seeded experiment")
    _add_common(experiment_run)
    experiment_run.add_argument(
        "--jobs", type=int, default=1, help="worker threads (results independent of it)"
    )
    experiment_run.set_defaults(handler=_cmd_experiment_run)

    entropy = commands.add_parser("entropy", help="covering-entropy diagnostics")
    entropy_sub = entropy.add_subparsers(
        dest="subcommand", required=True, metavar="subcommand"
    )
    entropy_scan = entropy_sub.add_parser(
        "scan", help="entropy growth across resolutions"
    )
    _add_common(entropy_scan)
    entropy_scan.set_defaults(handler=_cmd_entropy_scan)

    tailfit = commands.add_parser("tailfit", help="fit and validate a tail-decay model")
    _add_common(tailfit)
    tailfit.set_defaults(handler=_cmd_tailfit)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit status."""
    try:
        args = _build_parser().parse_args(argv)
        return int(args.handler(args))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NetSketchError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # fail closed: anything unexpected is internal
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
