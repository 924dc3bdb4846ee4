"""Command-line interface: ``pdmd generate|train|predict|validate|sensitivity|info``.

Exit codes: 0 success, 1 computational failure, 2 usage or validation error.
Label ranges are inclusive integer ranges written ``a..b`` (or a single label).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import (
    HeatSpec,
    SyntheticUnstableSpec,
    ToySpec,
    generate_heat_set,
    generate_synthetic_unstable,
    generate_toy,
    sample_heat_parameters,
)
from .dmd import AMPLITUDE_STRATEGIES, DmdConfig, spectrum_summary
from .errors import (
    ArchiveFormatError,
    DegenerateGeometryError,
    DimensionMismatchError,
    ExtrapolationError,
    PdmdError,
    ValidationError,
)
from .modelfile import is_model_dir, load_model, save_model
from .parametric import (
    VARIANTS,
    ForecastRequest,
    compute_error_report,
    fit_model,
    forecast_reduced,
)
from .pod import lift
from .regression import KINDS
from .sensitivity import nested_parameter_schedule, run_parameter_sensitivity, run_time_sensitivity
from .snapshots import MANIFEST, ParametricSnapshotSet, SnapshotMatrix, TimeAxis, read_archive, write_archive

USAGE_ERRORS = (ValidationError, ArchiveFormatError, DimensionMismatchError, ExtrapolationError,
                DegenerateGeometryError)

_RANGE = re.compile(r"^\s*(-?\d+)\s*(?:\.\.\s*(-?\d+)\s*)?$")


class UsageError(Exception):
    """Bad flags or flag combinations."""


def parse_label_range(text: str) -> list[int]:
    match = _RANGE.match(str(text))
    if not match:
        raise UsageError(f"label range must look like 'a..b' or 'k', got {text!r}")
    a = int(match.group(1))
    b = int(match.group(2)) if match.group(2) is not None else a
    if b < a:
        raise UsageError(f"empty label range {text!r}")
    return list(range(a, b + 1))


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


class _Printer:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, *lines):
        if not self.quiet:
            for line in lines:
                print(line)


def set_summary(data: ParametricSnapshotSet) -> str:
    kind = "real" if data.is_real else "complex"
    return f"p={data.p} m={data.m} N={data.n_times} dt={data.time_axis.dt:.3g} {kind}"


def set_details(data: ParametricSnapshotSet) -> list[str]:
    axis = data.time_axis
    lines = [
        f"field={data.field_name or '-'} t0={_fmt(axis.t0)} dt={_fmt(axis.dt)} "
        f"labels={axis.label_origin}..{axis.last_label}",
    ]
    for i, mem in enumerate(data.members):
        lines.append(f"parameter {i}: " + " ".join(_fmt(c) for c in mem.parameter))
    return lines


# -- subcommands ----------------------------------------------------------------


def cmd_generate(args, out) -> int:
    dest = Path(args.out)
    if args.problem == "toy":
        kwargs = {"m": args.m, "N": args.N}
        if args.params is not None:
            kwargs["parameters"] = tuple(args.params)
        data = generate_toy(ToySpec(**{k: v for k, v in kwargs.items() if v is not None}))
    elif args.problem == "heat":
        params = [20.0] if args.params is None else args.params
        count = params[0]
        if len(params) != 1 or count != int(count) or count < 1:
            raise UsageError(f"heat --params takes one parameter count >= 1, got {params}")
        holdout = args.holdout or 0
        if holdout and not args.holdout_out:
            raise UsageError("--holdout requires --holdout-out")
        train, held = sample_heat_parameters(int(count), holdout, seed=args.seed)
        spec = HeatSpec(grid=args.grid or 31, substeps=args.substeps or 10)
        data = generate_heat_set(spec, train)
        if holdout:
            held_set = generate_heat_set(spec, held)
            write_archive(held_set, args.holdout_out, args.encoding or "real64")
            out(f"holdout: {set_summary(held_set)} -> {args.holdout_out}")
    else:
        kwargs = {"rho": args.rho, "fraction": args.fraction, "N": args.N, "s": args.s,
                  "theta": args.theta, "seed": args.seed}
        if args.params is not None:
            kwargs["parameters"] = tuple(args.params)
        data = generate_synthetic_unstable(
            SyntheticUnstableSpec(**{k: v for k, v in kwargs.items() if v is not None}))
    encoding = args.encoding or ("real64" if data.is_real else "complex128")
    write_archive(data, dest, encoding)
    out(set_summary(data), *set_details(data))
    return 0


def cmd_train(args, out) -> int:
    data = read_archive(args.archive)
    if args.labels:
        labels = parse_label_range(args.labels)
        data = data.window(labels[0], labels[-1])
    config = DmdConfig(svd_rank=args.svd_rank, hodmd_depth=args.hodmd_depth,
                       stabilization=args.stabilize, amplitude_strategy=args.amplitudes)
    defaults = {"regressor": args.regressor}
    if args.gpr_lengthscale is not None:
        defaults["lengthscale"] = args.gpr_lengthscale
    if args.gpr_noise is not None:
        defaults["noise"] = args.gpr_noise
    model = fit_model(data, args.pod_rank, config, args.variant, defaults)
    save_model(model, args.out)
    sv = model.pod.singular_values
    out(f"variant={model.variant} n={model.n} p={model.p} N={data.n_times}",
        f"singular values: first={_fmt(sv[0])} n-th={_fmt(sv[model.n - 1])} "
        f"retained_energy={_fmt(model.pod.retained_energy())}")
    for i, op in enumerate(model.operators):
        s = spectrum_summary(op, tol=1e-6)
        out(f"operator {i}: eigenvalues={s['count']} on_unit_circle={s['on_unit_circle']} "
            f"off_unit_circle={s['off_unit_circle']} max_modulus={_fmt(s['max_modulus'])} "
            f"discarded={s['discarded']}")
        for note in op.notes:
            out(f"operator {i}: note: {note}")
    return 0


def cmd_predict(args, out) -> int:
    if not args.out and not args.coeffs:
        raise UsageError("predict needs --out and/or --coeffs")
    model = load_model(args.model)
    labels = parse_label_range(args.labels)
    if args.out and len(labels) < 2:
        raise UsageError("a field archive needs at least two labels")
    hyper = {k: v for k, v in (("lengthscale", args.gpr_lengthscale),
                                           ("noise", args.gpr_noise)) if v is not None}
    request = ForecastRequest(tuple(args.mu), tuple(labels), args.regressor, hyper or None)
    reduced = forecast_reduced(model, request)
    axis = model.time_axis
    times = axis.time(labels)
    if args.coeffs:
        rows = []
        for j, label in enumerate(labels):
            for i in range(model.n):
                z = reduced[i, j]
                rows.append([label, _fmt(times[j]), i, _fmt(z.real), _fmt(z.imag)])
        Path(args.coeffs).write_text(_csv_text(["label", "time", "coeff_index", "re", "im"], rows),
                                     encoding="utf-8")
    if args.out:
        field = lift(model.pod, reduced)
        if model.real_data:
            field = field.real
        out_axis = TimeAxis(float(axis.time(labels[0])), axis.dt, len(labels), labels[0])
        result = ParametricSnapshotSet(out_axis, (SnapshotMatrix(request.parameter, field),),
                                       model.field_name)
        write_archive(result, args.out, "real64" if model.real_data else "complex128")
    out(f"predicted {len(labels)} labels {labels[0]}..{labels[-1]} at mu=("
        + ", ".join(_fmt(c) for c in request.parameter) + ")")
    return 0


def cmd_validate(args, out) -> int:
    model = load_model(args.model)
    truth = read_archive(args.truth)
    labels = parse_label_range(args.labels)
    report = compute_error_report(model, truth, labels, regressor=args.regressor,
                                  forecast_scale=args.forecast_scale)
    kind = report.metadata["regressor"]
    rows = [[int(k), _fmt(t), _fmt(e), kind, int(x)]
            for k, t, e, x in zip(report.labels, report.times, report.e_I, report.excluded)]
    Path(args.out).write_text(
        _csv_text(["label", "time", "e_I", "regressor", "n_excluded_zero_norm"], rows), encoding="utf-8")
    per_path = Path(args.per_parameter) if args.per_parameter else \
        Path(args.out).with_name(Path(args.out).stem + "_per_parameter.csv")
    q = report.parameters.shape[1]
    per_rows = []
    for i, mu in enumerate(report.parameters):
        for j, label in enumerate(report.labels):
            per_rows.append([int(label), _fmt(report.times[j]), i, *(_fmt(c) for c in mu),
                             _fmt(report.per_parameter[i, j])])
    header = ["label", "time", "parameter_index", *(f"mu_{c + 1}" for c in range(q)), "relative_error"]
    per_path.write_text(_csv_text(header, per_rows), encoding="utf-8")
    worst = np.nanmax(report.e_I) if np.any(np.isfinite(report.e_I)) else float("nan")
    out(f"labels={len(labels)} max_e_I={_fmt(worst)} regressor={kind}")
    return 0


def cmd_sensitivity(args, out) -> int:
    data = read_archive(args.archive)
    kinds = [k.strip() for k in args.regressors.split(",") if k.strip()]
    for kind in kinds:
        if kind not in KINDS:
            raise UsageError(f"unknown regressor {kind!r}; choose from {', '.join(KINDS)}")
    if args.truth:
        pool, truth = data, read_archive(args.truth)
    elif args.holdout_indices:
        held = [int(i) for i in args.holdout_indices.split(",")]
        if any(not 0 <= i < data.p for i in held):
            raise UsageError(f"holdout indices must lie in 0..{data.p - 1}")
        truth = data.subset(held)
        pool = data.subset([i for i in range(data.p) if i not in held])
    else:
        raise UsageError("sensitivity needs --truth or --holdout-indices")
    config = DmdConfig(svd_rank=args.svd_rank, hodmd_depth=args.hodmd_depth,
                       stabilization=args.stabilize, amplitude_strategy=args.amplitudes)
    if args.mode == "parameter":
        initial = args.initial if args.initial is not None else min(pool.p, 2)
        if initial > pool.p:
            raise UsageError(f"--initial {initial} exceeds the {pool.p} available parameters")
        if args.train_count is not None and not 2 <= args.train_count <= pool.n_times:
            raise UsageError(f"--train-count must lie in 2..{pool.n_times}")
        needs_hull = any(k == "linear" for k in kinds)
        schedule = nested_parameter_schedule(
            pool.p, initial, args.step, args.seed,
            enclose=truth.parameters if needs_hull else None, pool_parameters=pool.parameters)
        if args.steps is not None:
            schedule = schedule[:args.steps + 1]
        table = run_parameter_sensitivity(pool, truth, schedule, args.pod_rank, args.probe_label, kinds,
                                          config, args.variant, args.train_count, args.seed)
    else:
        if not args.windows:
            raise UsageError("time mode needs --windows a..b (training window sizes)")
        counts = parse_label_range(args.windows)
        if counts[-1] > pool.n_times:
            raise UsageError(f"window size {counts[-1]} exceeds the {pool.n_times} available instants")
        table = run_time_sensitivity(pool, truth, counts, args.pod_rank, args.probe_label, kinds,
                                     config, args.variant)
        table.seed = args.seed
    Path(args.out).write_text(table.to_csv(), encoding="utf-8")
    out(f"{len(table.rows)} rows written to {args.out}")
    return 0


def cmd_info(args, out) -> int:
    path = Path(args.path)
    if is_model_dir(path):
        model = load_model(path)
        axis = model.time_axis
        kind = "real" if model.real_data else "complex"
        print(f"variant={model.variant} n={model.n} p={model.p} N={axis.count} dt={axis.dt:.3g} {kind}")
        print(f"t0={_fmt(axis.t0)} dt={_fmt(axis.dt)} labels={axis.label_origin}..{axis.last_label} "
              f"regressor={model.online_defaults.get('regressor')}")
        print("dmd_config " + json.dumps(model.dmd_config.to_dict(), sort_keys=True))
        for i, op in enumerate(model.operators):
            s = spectrum_summary(op, tol=1e-6)
            print(f"operator {i}: eigenvalues={s['count']} on_unit_circle={s['on_unit_circle']} "
                  f"off_unit_circle={s['off_unit_circle']} max_modulus={_fmt(s['max_modulus'])} "
                  f"discarded={s['discarded']}")
        return 0
    if (path / MANIFEST).is_file():
        data = read_archive(path)
        print(set_summary(data))
        for line in set_details(data):
            print(line)
        return 0
    if not path.exists():
        raise UsageError(f"{path}: no such file or directory")
    raise UsageError(f"{path}: neither a snapshot archive nor a model directory")


# -- parser -----------------------------------------------------------------------


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be an integer >= 1, got {text}")
    return value


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be an integer >= 0, got {text}")
    return value


def _nonneg_float(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _add_dmd_flags(p):
    p.add_argument("--variant", choices=VARIANTS, default="partitioned")
    p.add_argument("--pod-rank", type=_positive_int, required=True, help="number n of POD modes")
    p.add_argument("--svd-rank", type=_nonneg_int, default=0, help="DMD truncation rank (0 = automatic)")
    p.add_argument("--hodmd-depth", type=_positive_int, default=1, help="time-delay depth d (1 = plain DMD)")
    p.add_argument("--stabilize", type=_nonneg_float, default=None, metavar="EPS",
                   help="drop eigenvalues farther than EPS from the unit circle")
    p.add_argument("--amplitudes", choices=AMPLITUDE_STRATEGIES, default="first-snapshot")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdmd", description="Parametric dynamic mode decomposition.")
    parser.add_argument("--version", action="version", version=f"pdmd {__version__}")
    parser.add_argument("--seed", type=_nonneg_int, default=0, help="seed for every random choice")
    parser.add_argument("--config", help="JSON file of flag defaults; explicit flags win")
    parser.add_argument("--quiet", action="store_true", help="suppress summaries")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a benchmark snapshot archive")
    g.add_argument("problem", choices=("toy", "heat", "synthetic"))
    g.add_argument("--out", required=True)
    g.add_argument("--params", type=float, nargs="+", default=None,
                   help="toy/synthetic: parameter values; heat: number of sampled parameters")
    g.add_argument("--m", type=int, default=None, help="toy: spatial samples")
    g.add_argument("--N", type=int, default=None, help="toy/synthetic: time samples")
    g.add_argument("--grid", type=int, default=None, help="heat: interior nodes per axis")
    g.add_argument("--substeps", type=int, default=None, help="heat: solver substeps per label")
    g.add_argument("--holdout", type=_nonneg_int, default=None, help="heat: held-out parameter count")
    g.add_argument("--holdout-out", default=None, help="heat: archive for the held-out parameters")
    g.add_argument("--rho", type=float, default=None, help="synthetic: modulus of the injected mode")
    g.add_argument("--fraction", type=float, default=None, help="synthetic: injected amplitude fraction")
    g.add_argument("--theta", type=float, default=None, help="synthetic: angle of the injected mode")
    g.add_argument("--s", type=int, default=None, help="synthetic: state dimension")
    g.add_argument("--encoding", choices=("real64", "complex128"), default=None)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="fit a parametric model to an archive")
    t.add_argument("archive")
    t.add_argument("--out", required=True)
    t.add_argument("--labels", default=None, help="training window a..b (default: whole archive)")
    _add_dmd_flags(t)
    t.add_argument("--regressor", choices=KINDS, default="linear", help="default online regressor")
    t.add_argument("--gpr-lengthscale", type=float, default=None, help="gpr lengthscale")
    t.add_argument("--gpr-noise", type=float, default=None, help="gpr noise, relative to the signal scale")
    t.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="forecast the field at a parameter")
    p.add_argument("model")
    p.add_argument("--mu", type=float, nargs="+", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--regressor", choices=KINDS, default=None)
    p.add_argument("--gpr-lengthscale", type=float, default=None)
    p.add_argument("--gpr-noise", type=float, default=None)
    p.add_argument("--out", default=None, help="field archive")
    p.add_argument("--coeffs", default=None, help="reduced-coefficient CSV")
    p.set_defaults(func=cmd_predict)

    v = sub.add_parser("validate", help="e_I of a model against a truth archive")
    v.add_argument("model")
    v.add_argument("truth")
    v.add_argument("--labels", required=True)
    v.add_argument("--regressor", choices=KINDS, default=None)
    v.add_argument("--out", required=True)
    v.add_argument("--per-parameter", default=None)
    v.add_argument("--forecast-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("sensitivity", help="e_I against training-set or time-window size")
    s.add_argument("archive")
    s.add_argument("--mode", choices=("parameter", "time"), required=True)
    held = s.add_mutually_exclusive_group()
    held.add_argument("--truth", default=None, help="archive of held-out parameters")
    held.add_argument("--holdout-indices", default=None, help="comma-separated members held out")
    s.add_argument("--probe-label", type=int, required=True)
    s.add_argument("--regressors", default="linear", help="comma-separated regressor kinds")
    s.add_argument("--initial", type=_positive_int, default=None, help="parameter mode: |S_0|")
    s.add_argument("--step", type=_positive_int, default=1, help="parameter mode: members added per step")
    s.add_argument("--steps", type=_nonneg_int, default=None, help="parameter mode: number of steps")
    s.add_argument("--train-count", type=int, default=None, help="parameter mode: training instants")
    s.add_argument("--windows", default=None, help="time mode: window sizes a..b")
    _add_dmd_flags(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sensitivity)

    i = sub.add_parser("info", help="describe an archive or model")
    i.add_argument("path")
    i.set_defaults(func=cmd_info)
    return parser


def _apply_config(parser, argv):
    """Reparse with JSON config values as defaults so explicit flags win."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(config, dict):
        raise UsageError("config file must hold a JSON object")
    config = {k.replace("-", "_"): v for k, v in config.items()}
    known = set(vars(args))
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"unknown config keys for '{args.command}': {', '.join(unknown)}")
    config.pop("command", None)
    config.pop("config", None)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    parser.set_defaults(**{k: v for k, v in config.items() if k in ("seed", "quiet")})
    subparser.set_defaults(**config)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"pdmd: error: {exc}", file=sys.stderr)
        return 2
    out = _Printer(args.quiet)
    try:
        return args.func(args, out)
    except (UsageError, *USAGE_ERRORS) as exc:
        print(f"pdmd {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (PdmdError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"pdmd {args.command}: computation failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"pdmd {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
