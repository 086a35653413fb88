"""``homog`` command line: metrics, experiment, correlate, verify.

Exit codes: 0 success, 1 internal disagreement or failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from homog import dataio, metrics, reference
from homog.experiment import StudyConfig, StudyConfigError, run_study, synthesize_dataset
from homog.outcomes import validate
from homog.stats import correlate

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """User-facing input problem; maps to exit code 2."""


def _default_seed() -> int:
    raw = os.environ.get("HOMOG_SEED")
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"HOMOG_SEED must be an integer, got {raw!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _name_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _emit(data: bytes, output: str | None) -> None:
    if output is None or output == "-":
        sys.stdout.write(data.decode("utf-8"))
    else:
        Path(output).write_bytes(data)


def _say(args, text: str) -> None:
    if args.output not in (None, "-"):
        print(text)


def _fmt(v) -> str:
    return "null" if v is None else f"{v:.6g}"


# ----------------------------------------------------------------------------


def cmd_metrics(args) -> int:
    try:
        with open(args.input, encoding="utf-8", newline="") as fh:
            matrix = dataio.load_outcome_csv(fh)
    except (dataio.DataFormatError, OSError) as exc:
        print(f"error: {args.input}: {exc}", file=sys.stderr)
        report = {"input": args.input, "errors": [str(exc)]}
        if args.output not in (None, "-") or args.format == "json":
            _emit((json.dumps(report, indent=2) + "\n").encode(), args.output)
        return EXIT_INPUT

    report = validate(matrix)
    if not report.ok:
        for v in report:
            print(f"invalid: {v}", file=sys.stderr)
        body = {"input": args.input, "errors": list(report.violations)}
        _emit((json.dumps(body, indent=2) + "\n").encode(), args.output)
        return EXIT_INPUT

    weightings = tuple(metrics.GroupWeighting) if args.group_weighting == "all" \
        else (metrics.GroupWeighting(args.group_weighting),)
    values = metrics.all_metrics(matrix, weightings, loss_metrics=args.loss_metrics)
    _emit(dataio.write_report(values, args.format), args.output)
    if matrix.groups is None:
        print("warning: no group column; group metrics are null", file=sys.stderr)
    _say(args, f"{matrix.n_individuals} individuals x {matrix.n_deployments} deployments")
    for name in ("oh_individual",) + tuple(f"oh_group_{w.value}" for w in weightings):
        v = values[name]
        _say(args, f"  {name:20s} {_fmt(v.value)}  ({v.status})")
    return EXIT_OK


def _load_dataset(args):
    spec = args.dataset
    if spec == "synthetic":
        ds = synthesize_dataset(seed=args.seed)
        return ds, {"source": "synthetic", "seed": args.seed}
    path = Path(spec[len("german:"):] if spec.startswith("german:") else spec)
    if not path.exists():
        raise InputError(f"dataset not found: {path}")
    if spec.startswith("german:") or path.suffix == ".data":
        with open(path, encoding="utf-8") as fh:
            ds = dataio.load_german_credit(fh, split_seed=args.seed)
        return ds, {"source": "german-credit", "path": str(path)}
    if not args.tasks:
        raise InputError("--tasks is required for a tabular csv dataset")
    with open(path, encoding="utf-8", newline="") as fh:
        ds = dataio.load_tabular_csv(fh, args.tasks, args.group_col, split_seed=args.seed)
    return ds, {"source": "csv", "path": str(path), "tasks": list(args.tasks),
                "group_column": args.group_col}


def cmd_experiment(args) -> int:
    dataset, info = _load_dataset(args)
    config = StudyConfig(
        protocols=tuple(args.protocols),
        train_sizes=tuple(args.sizes),
        n_data_samples=args.trials_samples,
        n_seeds_per_sample=args.trials_seeds,
        model_family=args.model,
        base_seed=args.seed,
    )
    config.check(dataset)
    result = run_study(dataset, config, threads=args.threads, dataset_info=info)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for p in config.protocols:
        (out / f"study_{p}.json").write_bytes(dataio.write_report(result.for_protocol(p), "json"))
    (out / "plot.csv").write_bytes(dataio.write_report(result, "csv"))

    print(f"{len(result.trials)} trials, {dataset.n_tasks} tasks, pool {dataset.pool_size}")
    for n in config.train_sizes:
        cells = [f"{p} OH {_fmt(result.aggregate(p, n, 'oh_individual').mean)}" for p in config.protocols]
        print(f"  n={n:<5d} " + "  ".join(cells))
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def _parse_pairs(text: str, names: list[str]):
    if text == "all":
        return "all"
    pairs = []
    for item in _name_list(text):
        a, sep, b = item.partition(":")
        if not sep or a not in names or b not in names:
            raise InputError(f"bad pair {item!r}; use name:name with columns from {names}")
        pairs.append((a, b))
    return pairs


def cmd_correlate(args) -> int:
    with open(args.input, encoding="utf-8", newline="") as fh:
        series = dataio.load_series_csv(fh)
    pairs = _parse_pairs(args.pairs, list(series))
    report = correlate(series, pairs, args.permutations, args.seed, args.threads)
    _emit(dataio.write_report(report, args.format), args.output)
    for pc in report.pairs:
        if pc.pearson_r is None:
            _say(args, f"  {pc.first} ~ {pc.second}: {pc.status}")
        else:
            _say(args, f"  {pc.first} ~ {pc.second}: r={pc.pearson_r:.4f} (p={pc.p_pearson:.4g})"
                       f" rho={pc.spearman_rho:.4f} (p={pc.p_spearman:.4g})")
    return EXIT_OK


def cmd_verify(args) -> int:
    if (args.input is None) == (args.fuzz is None):
        raise InputError("verify needs exactly one of --input or --fuzz")
    if args.input is not None:
        with open(args.input, encoding="utf-8", newline="") as fh:
            matrix = dataio.load_outcome_csv(fh)
        cases = [(args.input, matrix)]
    else:
        if args.fuzz < 1:
            raise InputError("--fuzz needs a positive count")
        rng = np.random.default_rng(args.seed)
        cases = ((f"fuzz case {c}", reference.random_matrix(rng)) for c in range(args.fuzz))
    checked = 0
    for label, matrix in cases:
        problems = reference.cross_check(matrix, args.tolerance)
        checked += 1
        if problems:
            print(f"DISAGREEMENT in {label}: {problems[0]}", file=sys.stderr)
            for extra in problems[1:]:
                print(f"  also: {extra}", file=sys.stderr)
            return EXIT_FAIL
    print(f"ok: checked {checked}, every metric agrees with the reference oracle")
    return EXIT_OK


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys mirror the flags; flags win")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    parser = argparse.ArgumentParser(prog="homog", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", parents=[common], help="homogenization metrics of an outcome csv")
    p.add_argument("--input", required=True)
    p.add_argument("--group-weighting", choices=["average", "uniform", "worst", "all"], default="all")
    p.add_argument("--loss-metrics", action="store_true")
    p.add_argument("--output")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("experiment", parents=[common], help="fixed vs disjoint training-data study")
    p.add_argument("--dataset", default="synthetic",
                   help="'synthetic', a tabular csv, or a German Credit .data file")
    p.add_argument("--tasks", type=_name_list)
    p.add_argument("--group-col")
    p.add_argument("--protocols", type=_name_list, default=["fixed", "disjoint"])
    p.add_argument("--sizes", type=_int_list, default=[50, 100, 200, 400])
    p.add_argument("--model", choices=["logreg", "mlp"], default="logreg")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials-samples", type=int, default=5)
    p.add_argument("--trials-seeds", type=int, default=5)
    p.add_argument("--output", required=True, help="directory for study json and plot csv")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("correlate", parents=[common], help="pairwise correlations of metric series")
    p.add_argument("--input", required=True)
    p.add_argument("--pairs", default="all", help="'all' or a:b,c:d")
    p.add_argument("--permutations", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--output")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("verify", parents=[common], help="cross-check metrics against the oracle")
    p.add_argument("--input")
    p.add_argument("--fuzz", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tolerance", type=float, default=1e-12)
    p.add_argument("--output")
    p.set_defaults(func=cmd_verify)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    subparsers = parser._subparsers._group_actions[0].choices
    if not known.config or command not in subparsers:
        return parser.parse_args(argv)
    try:
        with open(known.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise InputError("config file must hold a JSON object")
    sub = subparsers[command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in actions or dest in ("config", "help"):
            raise InputError(f"config key {key!r} is not a flag of '{command}'")
        if isinstance(value, str) and actions[dest].type is not None:
            value = actions[dest].type(value)
        defaults[dest] = value
    # config values become defaults, so anything given on the command line wins
    sub.set_defaults(**defaults)
    for dest in defaults:
        actions[dest].required = False
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        if args.threads < 1:
            raise InputError("--threads must be at least 1")
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (InputError, dataio.DataFormatError, StudyConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
