"""Command-line entry point.

Exit codes: 0 all checks pass, 1 a check fails or the arguments are unusable,
2 input or IO error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import cylinder_evolution as cyl
from . import soliton_identities as si
from . import sphere_spectral as sph
from . import warped_soliton as ws

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


def _window(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like lo:hi, got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError("window needs lo < hi")
    return lo, hi


def read_config_file(path: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys use flag names without dashes."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _envelope(args, results: dict) -> dict:
    return {"tool": "solitonlab", "version": __version__, "config": _config_record(args), **results}


def _config_record(args) -> dict:
    rec = {}
    for k, v in sorted(vars(args).items()):
        if k in ("func", "config"):
            continue
        rec[k] = list(v) if isinstance(v, tuple) else v
    return rec


# ---------------------------------------------------------------------------
# Subcommands


def cmd_bryant(args) -> int:
    if not args.t_max > 0 or not args.tol > 0:
        raise UsageError("--t-max and --tol must be positive")
    try:
        profile = ws.integrate_profile(ws.tip_series(), s_max=args.t_max, tolerance=args.tol)
    except ws.IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_IO
    drift = profile.first_integral_drift()
    f_end = float(profile.f[-1])
    fR = None
    if f_end >= 1e3:
        lvl = ws.level_set_lookup(profile, 1e3)
        fR = 1e3 * (1.0 - lvl.f_prime**2)
    meta = {
        "tool": "solitonlab",
        "version": __version__,
        "config": _config_record(args),
        "first_integral_drift": drift,
        "drift_bound": profile.drift_bound(),
        "f_max": f_end,
        "nodes": len(profile.s_grid),
        "fR_at_1000": fR,
    }
    out = Path(args.out)
    ws.save_profile(profile, out, extra=meta)
    print(f"profile -> {out} ({len(profile.s_grid)} nodes, f_max={f_end:.6g}, drift={drift:.3g})")
    return EXIT_OK if drift <= profile.drift_bound() else EXIT_FAIL


def _load(path) -> ws.SolitonProfile:
    if path is None:
        raise UsageError("--profile is required")
    return ws.load_profile(path)


def cmd_verify(args) -> int:
    profile = _load(args.profile)
    rep = si.curvature_fields(profile)
    checks = si.identity_suite(rep, args.window, args.tol)
    ok = all(c.passed for c in checks)
    report = _envelope(args, {"checks": [c.as_record() for c in checks], "pass": ok})
    _write(args.out, _dump(report))
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.check}: {c.value:.3e} (<= {c.threshold:.1e})", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_rates(args) -> int:
    profile = _load(args.profile)
    rep = si.curvature_fields(profile)
    names = [args.quantity] if args.quantity else list(si.RATE_BOUNDS)
    rows, ok = [], True
    for name in names:
        fit = si.fit_asymptotic_rate(rep, name, args.window)
        bound = si.RATE_BOUNDS.get(name)
        passed = bound is None or fit.exponent <= bound + si.RATE_SLACK
        ok &= passed
        rows.append({"quantity": name, "exponent": fit.exponent, "constant": fit.constant,
                     "rms_residual": fit.rms_residual, "bound": bound, "pass": passed})
        print(f"{'PASS' if passed else 'FAIL'} {name}: exponent {fit.exponent:.4f} (bound {bound})", file=sys.stderr)
    _write(args.out, _dump(_envelope(args, {"rates": rows, "pass": ok})))
    return EXIT_OK if ok else EXIT_FAIL


_OPERATORS = {
    "scalar": (sph.scalar_spectrum, 2),
    "one-form": (sph.one_form_operator_spectrum, 3),
    "tensor": (sph.tensor_operator_spectrum, 3),
}


def cmd_spectrum(args) -> int:
    solve, min_l = _OPERATORS[args.operator]
    if args.lmax < min_l:
        raise UsageError(f"--lmax must be >= {min_l} for {args.operator}")
    rot = sph.random_rotation(np.random.default_rng(args.seed)) if args.seed is not None else None
    table = solve(sph.HarmonicBasis.build(args.lmax, rotation=rot))
    distinct = table.distinct()
    err = table.discretization_error
    if args.operator == "scalar":
        want = [(l * (l + 1), 2 * l + 1) for l in range(args.lmax + 1)]
        ok = len(distinct) == len(want) and all(
            abs(v - w) <= 1e-8 * max(1, w) and m == n for (v, m), (w, n) in zip(distinct, want))
    elif args.operator == "one-form":
        ok = distinct[0][0] >= 1.0 - 10 * err - 1e-12
    else:
        ok = (table.kernel_basis.shape[1] == 1 and distinct[0][1] == 1
              and abs(distinct[1][0] - 2.0) <= max(10 * err, 1e-9))
    ok &= table.multiplicities_are_so3()
    body = {
        "operator": table.operator_kind,
        "l_max": args.lmax,
        "discretization_error": err,
        "kernel_dimension": int(table.kernel_basis.shape[1]),
        "table": table.records(),
        "pass": bool(ok),
    }
    _write(args.out, _dump(_envelope(args, body)))
    return EXIT_OK if ok else EXIT_FAIL


VECTOR_MIN_EXPONENT = 0.48
TENSOR_MIN_EXPONENT = 0.98
GAP_TIMES = 1.0 - np.geomspace(0.5, 1e-3, 40)


def run_cylinder_case(case: str, seed: int, seeds: int, l_max: int) -> tuple[list[dict], list[list[cyl.GapSample]]]:
    modes = cyl.CylinderModes(l_max)
    rows, curves = [], []
    for k in range(seeds):
        rng = np.random.default_rng([seed, k])
        if case == "vector":
            field = cyl.random_vector_field(rng, modes)
            gaps = [cyl.axial_projection_gap(field, t, modes) for t in GAP_TIMES]
            p = cyl.fit_exponent(GAP_TIMES, [g.gap for g in gaps])
            rows.append({"seed": k, "gap_exponent": p, "constant": max(g.gap / math.sqrt(1 - g.t) for g in gaps),
                         "pass": p >= VECTOR_MIN_EXPONENT})
        else:
            field = cyl.random_tensor_field(rng, modes)
            gaps = [cyl.ric_projection_gap(field, t, modes) for t in GAP_TIMES]
            chi = [cyl.ric_projection_gap(field, t, modes, metric="round").gap for t in GAP_TIMES]
            sig = [cyl.sigma_round_norm(field, t, modes) for t in GAP_TIMES]
            p_chi = cyl.fit_exponent(GAP_TIMES, chi)
            p_sig = cyl.fit_exponent(GAP_TIMES, sig)
            p_gap = cyl.fit_exponent(GAP_TIMES, [g.gap for g in gaps])
            rows.append({"seed": k, "gap_sup": max(g.gap for g in gaps), "gap_exponent": p_gap,
                         "chi_exponent": p_chi, "sigma_exponent": p_sig,
                         "pass": p_gap >= 0.0 and min(p_chi, p_sig) >= TENSOR_MIN_EXPONENT})
        curves.append(gaps)
    return rows, curves


def cmd_cylinder(args) -> int:
    if args.seeds < 1 or args.lmax < 1:
        raise UsageError("--seeds and --lmax must be >= 1")
    rows, curves = run_cylinder_case(args.case, args.seed, args.seeds, args.lmax)
    ok = all(r["pass"] for r in rows)
    report = _envelope(args, {"seeds": rows, "pass": ok})
    if args.out:
        out = Path(args.out)
        out.with_suffix(".json").write_text(_dump(report))
        header = [f"solitonlab {__version__}", "config " + json.dumps(_config_record(args), sort_keys=True)]
        cyl.write_gaps_csv(out, curves[0], header=header)
    else:
        sys.stdout.write(_dump(report))
    worst = min(r["gap_exponent"] if args.case == "vector" else min(r["chi_exponent"], r["sigma_exponent"])
                for r in rows)
    print(f"{'PASS' if ok else 'FAIL'} {args.case}: {len(rows)} seeds, worst exponent {worst:.4f}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="solitonlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--out", help="output path (default: stdout)")

    p = sub.add_parser("bryant", help="integrate the soliton profile")
    common(p)
    p.add_argument("--tol", type=float, default=1e-10, help="integrator relative tolerance")
    p.add_argument("--t-max", type=float, default=2e4, help="radial extent s_max of the integration")
    p.set_defaults(func=cmd_bryant, out="bryant_profile.csv")

    p = sub.add_parser("verify", help="run the identity suite on a profile")
    common(p)
    p.add_argument("--profile")
    p.add_argument("--window", type=_window, default=si.DEFAULT_WINDOW, help="f range lo:hi")
    p.add_argument("--tol", type=float, default=si.IDENTITY_THRESHOLD, help="residual threshold")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("rates", help="fit asymptotic decay exponents")
    common(p)
    p.add_argument("--profile")
    p.add_argument("--window", type=_window, default=si.RATE_WINDOW)
    p.add_argument("--quantity", choices=sorted(si.QUANTITIES))
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("spectrum", help="eigenvalues of a sphere operator")
    common(p)
    p.add_argument("--operator", choices=sorted(_OPERATORS), default="tensor")
    p.add_argument("--lmax", type=int, default=12)
    p.add_argument("--seed", type=int, help="rotate the quadrature grid randomly")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("cylinder", help="decay of random data on the shrinking cylinder")
    common(p)
    p.add_argument("--case", choices=["vector", "lichnerowicz"], default="vector")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--lmax", type=int, default=4)
    p.set_defaults(func=cmd_cylinder)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    values = read_config_file(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for k, v in values.items():
        if k not in known or k in ("config", "help"):
            raise UsageError(f"unknown config key {k!r}")
        action = known[k]
        defaults[k] = action.type(v) if action.type else v
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_OK if exc.code in (0, None) else EXIT_FAIL
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
