"""Command-line harness: seeded verification suites, tensor dumps,
geodesic integration, and the special-form fit.

Exit codes: 0 all applicable checks pass; 1 a check failed; 2 bad
configuration, metric file, or expression; 3 a numerical domain error
(invalid sample, degenerate metric, domain exit).

Structured reports are JSON documents {"meta": ..., "report": ...}; the
"report" subtree is byte-reproducible for identical configurations
(timestamps and environment live under "meta" only).
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .checks import CHECK_NAMES, run_checks
from .classify import fit_special_berwald
from .curvature import CurvatureContext, geodesic
from .expr import ParseError
from .jets import JetDomainError, JetOrderError
from .metrics import (
    BUILTIN_METRICS,
    DomainError,
    EvalPoint,
    MetricDefinitionError,
    builtin_metric,
    load_metric_file,
    sample_points,
)

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_INDEX_ORDER_NOTE = (
    "entries are nested row-major with the first slot as the leftmost "
    "index: a tensor T^i_jkl is entries[i][j][k][l]"
)


class _ConfigError(ValueError):
    pass


def _parse_vector(text: str, label: str) -> np.ndarray:
    try:
        return np.array([float(part) for part in text.split(",")], dtype=np.float64)
    except ValueError:
        raise _ConfigError(f"{label} must be a comma-separated list of numbers, got {text!r}")


def _parse_tolerances(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        name, sep, value = pair.partition("=")
        if not sep:
            raise _ConfigError(f"--tol expects name=value, got {pair!r}")
        if name not in CHECK_NAMES:
            raise _ConfigError(
                f"unknown check {name!r}; known checks: {', '.join(CHECK_NAMES)}"
            )
        try:
            out[name] = float(value)
        except ValueError:
            raise _ConfigError(f"tolerance for {name!r} is not a number: {value!r}")
    return out


def _resolve_metric(args):
    name = args.metric
    if name in BUILTIN_METRICS:
        return builtin_metric(name, args.dim)
    spec = load_metric_file(name)
    if args.dim is not None and args.dim != spec.dim and not args._dim_defaulted:
        raise _ConfigError(
            f"--dim {args.dim} conflicts with dimension {spec.dim} from {name}"
        )
    return spec


def _meta() -> dict:
    return {
        "tool": "finslerlab",
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
    }


def _emit(text: str, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _structured(report_dict: dict, out_path):
    document = {"meta": _meta(), "report": report_dict}
    _emit(json.dumps(document, sort_keys=True, indent=2) + "\n", out_path)


# -- subcommands ---------------------------------------------------------------


def _cmd_check(args) -> int:
    spec = _resolve_metric(args)
    tolerances = _parse_tolerances(args.tol)
    report = run_checks(spec, samples=args.samples, seed=args.seed, tolerances=tolerances)
    if args.format == "structured":
        _structured(report.to_dict(), args.out)
    else:
        lines = [
            f"metric {report.metric} (kind={report.kind}, n={report.dim}), "
            f"{report.samples} samples, seed {report.seed}",
            "",
            f"{'check':34s} {'max residual':>13s} {'tolerance':>10s} {'applies':>8s}  verdict",
        ]
        ordered = sorted(
            report.records,
            key=lambda r: -1.0 if r.max_residual is None else r.max_residual,
            reverse=True,
        )
        for r in ordered:
            res = "-" if r.max_residual is None else f"{r.max_residual:.3e}"
            lines.append(
                f"{r.name:34s} {res:>13s} {r.tolerance:>10.1e} "
                f"{r.applicable:>4d}/{r.samples:<3d}  {r.verdict}"
            )
        sb = report.special_berwald
        lines += [
            "",
            f"special-form fit: {sb['classified_samples']}/{sb['total_samples']} samples "
            f"classified (max residual {sb['max_fit_residual']:.3e}, "
            f"threshold {sb['threshold']:g})",
            f"verdict: {report.verdict}",
            "",
        ]
        _emit("\n".join(lines), args.out)
    return EXIT_PASS if report.verdict == "pass" else EXIT_CHECK_FAILED


_TENSOR_DUMP = [
    ("g", "g", ("lower", "lower")),
    ("g_inv", "g_inv", ("upper", "upper")),
    ("angular", "h_low", ("lower", "lower")),
    ("angular_mixed", "h_mix", ("upper", "lower")),
    ("cartan", "cartan", ("lower", "lower", "lower")),
    ("mean_cartan", "mean_cartan", ("lower",)),
    ("matsumoto", "matsumoto", ("lower", "lower", "lower")),
    ("spray", "G", ("upper",)),
    ("nonlinear_connection", "N", ("upper", "lower")),
    ("berwald_connection", "Gamma", ("upper", "lower", "lower")),
    ("berwald", "berwald", ("upper", "lower", "lower", "lower")),
    ("mean_berwald", "mean_berwald", ("lower", "lower")),
    ("douglas", "douglas", ("upper", "lower", "lower", "lower")),
    ("landsberg", "landsberg", ("lower", "lower", "lower")),
    ("mean_landsberg", "mean_landsberg", ("lower",)),
    ("riemann", "riemann", ("upper", "lower")),
    ("riemann_hh", "riemann_hh", ("upper", "lower", "lower", "lower")),
    ("h_curvature", "h_curvature", ("lower", "lower")),
    ("stretch", "stretch", ("lower", "lower", "lower", "lower")),
]


def _cmd_tensors(args) -> int:
    spec = _resolve_metric(args)
    if args.x is not None or args.y is not None:
        if args.x is None or args.y is None:
            raise _ConfigError("provide both --x and --y, or neither")
        point = EvalPoint(_parse_vector(args.x, "--x"), _parse_vector(args.y, "--y"))
    else:
        point = sample_points(spec, 1, args.seed)[0]
    ctx = CurvatureContext(spec, point, order=6)
    tensors = {}
    for public, attr, valence in _TENSOR_DUMP:
        value = np.asarray(getattr(ctx, attr).value, dtype=np.float64)
        tensors[public] = {"valence": list(valence), "entries": value.tolist()}
    report = {
        "metric": {"name": spec.name, "kind": spec.kind, "dim": spec.dim},
        "point": {"x": point.x.tolist(), "y": point.y.tolist()},
        "F": float(np.sqrt(ctx.F2.value)),
        "index_order": _INDEX_ORDER_NOTE,
        "tensors": tensors,
    }
    if args.format == "structured":
        _structured(report, args.out)
    else:
        lines = [
            f"metric {spec.name} (kind={spec.kind}, n={spec.dim})",
            f"point x={point.x.tolist()} y={point.y.tolist()}  F={report['F']:.12g}",
            f"note: {_INDEX_ORDER_NOTE}",
            "",
        ]
        for public, _, valence in _TENSOR_DUMP:
            entries = np.asarray(tensors[public]["entries"])
            lines.append(f"{public} {tuple(valence)}:")
            lines.append(np.array2string(entries, precision=10, suppress_small=False))
            lines.append("")
        _emit("\n".join(lines), args.out)
    return EXIT_PASS


def _cmd_geodesic(args) -> int:
    spec = _resolve_metric(args)
    x0 = _parse_vector(args.x0, "--x0")
    y0 = _parse_vector(args.y0, "--y0")
    traj = geodesic(spec, x0, y0, T=args.T, steps=args.steps)
    n = spec.dim
    header = "# t " + " ".join(f"x{i+1}" for i in range(n)) + " " + " ".join(
        f"v{i+1}" for i in range(n)
    ) + " F"
    rows = [header]
    for k in range(len(traj.t)):
        fields = (
            [traj.t[k]] + list(traj.x[k]) + list(traj.v[k]) + [traj.F[k]]
        )
        rows.append(" ".join(f"{v:.17g}" for v in fields))
    _emit("\n".join(rows) + "\n", args.out)
    summary = (
        f"steps written: {len(traj.t)}  F drift: {traj.F_drift:.3e}"
        + (f"  DOMAIN EXIT at t={traj.t[-1]:.6g}" if traj.exited else "")
    )
    print(summary, file=sys.stderr)
    return EXIT_NUMERICAL if traj.exited else EXIT_PASS


def _cmd_fit_special(args) -> int:
    spec = _resolve_metric(args)
    points = sample_points(spec, args.samples, args.seed)
    rows = []
    for p in points:
        ctx = CurvatureContext(spec, p, order=5)
        fit = fit_special_berwald(ctx)
        rows.append(
            {
                "x": p.x.tolist(),
                "y": p.y.tolist(),
                "lambda": fit.lam,
                "mu": fit.mu.tolist(),
                "residual": fit.residual,
                "classified": fit.is_special,
            }
        )
    classified = sum(r["classified"] for r in rows)
    report = {
        "metric": {"name": spec.name, "kind": spec.kind, "dim": spec.dim},
        "config": {"samples": args.samples, "seed": args.seed},
        "fits": rows,
        "classified_samples": classified,
        "max_residual": max(r["residual"] for r in rows),
    }
    if args.format == "structured":
        _structured(report, args.out)
    else:
        lines = [
            f"metric {spec.name} (kind={spec.kind}, n={spec.dim}); "
            f"{classified}/{args.samples} samples match the special Berwald form",
            "",
            f"{'residual':>12s} {'lambda':>12s} {'|mu|':>12s}",
        ]
        for r in sorted(rows, key=lambda r: r["residual"], reverse=True):
            mu_norm = float(np.linalg.norm(r["mu"]))
            lines.append(f"{r['residual']:>12.3e} {r['lambda']:>12.5g} {mu_norm:>12.5g}")
        lines.append("")
        _emit("\n".join(lines), args.out)
    return EXIT_PASS


# -- argument plumbing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finslerlab",
        description=(
            "Pointwise curvature computation and identity verification for "
            "Finsler metrics."
        ),
    )
    parser.add_argument("--version", action="version", version=f"finslerlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, samples=None):
        p.add_argument(
            "--metric",
            required=True,
            help=f"built-in name ({', '.join(BUILTIN_METRICS)}) or a metric file path",
        )
        p.add_argument("--dim", type=int, default=None, help="dimension for built-ins (default 3)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--format", choices=("human", "structured"), default="human")
        if samples is not None:
            p.add_argument("--samples", type=int, default=samples)

    p_check = sub.add_parser("check", help="run the sampled identity suites")
    common(p_check, samples=20)
    p_check.add_argument(
        "--tol",
        action="append",
        metavar="NAME=VALUE",
        help="override a check tolerance (repeatable)",
    )
    p_check.set_defaults(fn=_cmd_check)

    p_tensors = sub.add_parser("tensors", help="dump every curvature tensor at one point")
    common(p_tensors)
    p_tensors.add_argument("--x", default=None, help="comma-separated position")
    p_tensors.add_argument("--y", default=None, help="comma-separated direction")
    p_tensors.set_defaults(fn=_cmd_tensors)

    p_geo = sub.add_parser("geodesic", help="integrate a geodesic and write the trajectory")
    common(p_geo)
    p_geo.add_argument("--x0", required=True, help="comma-separated start position")
    p_geo.add_argument("--y0", required=True, help="comma-separated start velocity")
    p_geo.add_argument("--T", type=float, default=1.0, help="integration time (default 1)")
    p_geo.add_argument("--steps", type=int, default=2000)
    p_geo.set_defaults(fn=_cmd_geodesic)

    p_fit = sub.add_parser("fit-special", help="fit the special Berwald form over samples")
    common(p_fit, samples=20)
    p_fit.set_defaults(fn=_cmd_fit_special)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args._dim_defaulted = args.dim is None
    if args.dim is None:
        args.dim = 3
    if getattr(args, "samples", 1) < 1:
        print("error: --samples must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.fn(args)
    except (MetricDefinitionError, ParseError, _ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, JetDomainError, JetOrderError) as err:
        print(f"numerical domain error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
