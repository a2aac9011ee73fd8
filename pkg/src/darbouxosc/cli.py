"""Command-line front end.

Subcommands: simulate, verify, effective-potential, curvature, spectrum,
staeckel-check.  Values come from (lowest to highest precedence) built-in
defaults, a ``--config`` JSON file, a ``--preset`` and explicit flags.
CSV output uses LF line endings and 17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .dynamics import IntegratorConfig, SCHEMES, integrate
from .errors import ConvergenceError, DarbouxError, DomainError, ParameterError
from .integrals import verify_integrals
from .model import Kind, Parameters, PhaseState, curvature_extrema, default_kind, resolve_kind, scalar_curvature
from .quantum import SpectrumRequest, asymptote, energy_levels
from .radial import canonical_Q, effective_potential, effective_potential_profile
from .staeckel import check_instance

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2

PRESETS = {
    "fig1-hyperbolic": {"lambda": 0.02, "omega": 1.0, "c_n": 100.0, "kind": "type_i"},
    "fig1-spherical": {"lambda": -0.02, "omega": 1.0, "c_n": 100.0, "kind": "type_ii"},
    "fig1-flat": {"lambda": 0.0, "omega": 1.0, "c_n": 100.0, "kind": "flat"},
    "fig2-exterior": {"lambda": -0.02, "omega": 1.0, "c_n": 100.0, "kind": "type_iii"},
}

COMMON_DEFAULTS = {"lambda": 0.02, "omega": 1.0, "n_dim": 2, "hbar": 1.0, "seed": 42,
                   "out": None, "format": "csv", "kind": None}

COMMAND_DEFAULTS = {
    "simulate": {"q0": "1,0", "p0": "0,1", "t_end": 10.0, "dt": 1e-3, "scheme": "gauss4", "stride": 10},
    "verify": {"samples": 100},
    "effective-potential": {"c_n": 100.0, "r_start": None, "r_end": None, "steps": 200, "sidecar": None},
    "curvature": {"r_start": None, "r_end": None, "steps": 200, "sidecar": None},
    "spectrum": {"levels": 10},
    "staeckel-check": {"samples": 100},
}


class ConfigError(Exception):
    pass


def fmt(x) -> str:
    return format(float(x), ".17g")


def _json_num(x):
    if x is None:
        return None
    x = float(x)
    return "inf" if math.isinf(x) else x


# ---------------------------------------------------------------- parsing

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--lambda", dest="lambda", type=float, help="deformation parameter")
    p.add_argument("--omega", type=float)
    p.add_argument("--n-dim", dest="n_dim", type=int)
    p.add_argument("--hbar", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--kind", help="type_i, type_ii (interior), type_iii (exterior) or flat")
    p.add_argument("--config", help="JSON file with default values for any flag")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="darbouxosc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a trajectory and write it as CSV")
    _add_common(p)
    p.add_argument("--q0", help="comma-separated initial coordinates")
    p.add_argument("--p0", help="comma-separated initial momenta")
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--stride", type=int, help="output every STRIDE steps")

    p = sub.add_parser("verify", help="bracket, involution and rank sweep")
    _add_common(p)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("effective-potential", help="radial effective potential profile")
    _add_common(p)
    p.add_argument("--c-n", dest="c_n", type=float, help="squared total angular momentum")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--r-start", dest="r_start", type=float)
    p.add_argument("--r-end", dest="r_end", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--sidecar", help="path of the JSON summary (default: OUT with .json suffix)")

    p = sub.add_parser("curvature", help="scalar curvature profile")
    _add_common(p)
    p.add_argument("--r-start", dest="r_start", type=float)
    p.add_argument("--r-end", dest="r_end", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--sidecar")

    p = sub.add_parser("spectrum", help="energy levels of the hyperbolic oscillator")
    _add_common(p)
    p.add_argument("--levels", type=int)

    p = sub.add_parser("staeckel-check", help="residuals of the Staeckel construction")
    _add_common(p)
    p.add_argument("--samples", type=int)
    return parser


def resolve_options(args: argparse.Namespace) -> Dict:
    opts = dict(COMMON_DEFAULTS)
    opts.update(COMMAND_DEFAULTS[args.command])
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(cfg) - set(opts) - {"preset"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        opts.update(cfg)
    preset = getattr(args, "preset", None) or opts.pop("preset", None)
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        opts.update(PRESETS[preset])
    for key, val in vars(args).items():
        if key in ("command", "config", "preset") or val is None:
            continue
        opts[key] = val
    seed = opts["seed"]
    if not (isinstance(seed, int) and 0 <= seed < 2**64):
        raise ConfigError("seed must be an unsigned 64-bit integer")
    for key in ("steps",):
        if key in opts and opts[key] < 2:
            raise ConfigError("grids need at least 2 steps")
    return opts


def _params(opts) -> Parameters:
    return Parameters(opts["lambda"], opts["omega"], opts["n_dim"], opts["hbar"])


def _kind(params, opts) -> Kind:
    return default_kind(params) if opts.get("kind") is None else resolve_kind(params, opts["kind"])


def _vector(text, name) -> np.ndarray:
    try:
        return np.array([float(v) for v in str(text).split(",")])
    except ValueError as exc:
        raise ConfigError(f"{name} must be a comma-separated list of numbers") from exc


# ---------------------------------------------------------------- output helpers

def _open_out(path):
    if path is None:
        return sys.stdout, False
    return open(path, "w", newline="\n"), True


def write_csv(path, header: Sequence[str], rows) -> None:
    fh, close = _open_out(path)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    finally:
        if close:
            fh.close()


def write_json(path, obj) -> None:
    fh, close = _open_out(path)
    try:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
    finally:
        if close:
            fh.close()


def _emit_table(opts, header, rows, summary):
    """Main table as CSV (plus JSON sidecar) or everything as one JSON object."""
    if opts["format"] == "json":
        write_json(opts["out"], {"summary": summary, "columns": list(header),
                                 "rows": [[_json_num(v) for v in row] for row in rows]})
        return
    write_csv(opts["out"], header, rows)
    sidecar = opts.get("sidecar")
    if sidecar is None and opts["out"] is not None:
        sidecar = str(Path(opts["out"]).with_suffix(".json"))
    if sidecar is not None:
        write_json(sidecar, summary)
    else:
        json.dump(summary, sys.stderr)
        sys.stderr.write("\n")


def _default_grid(params, kind, opts, r_lo_default):
    r_c = params.r_c
    if kind is Kind.TYPE_II:
        lo, hi = r_lo_default, r_c * (1 - 1e-3)
    elif kind is Kind.TYPE_III:
        lo, hi = r_c * (1 + 1e-3), 10 * r_c
    else:
        lo, hi = r_lo_default, 20.0
    lo = lo if opts["r_start"] is None else opts["r_start"]
    hi = hi if opts["r_end"] is None else opts["r_end"]
    return np.linspace(lo, hi, int(opts["steps"]))


# ---------------------------------------------------------------- commands

def cmd_simulate(opts) -> int:
    params = _params(opts)
    q0, p0 = _vector(opts["q0"], "q0"), _vector(opts["p0"], "p0")
    if q0.size != params.n_dim or p0.size != params.n_dim:
        raise ConfigError(f"q0 and p0 need {params.n_dim} components")
    config = IntegratorConfig(opts["scheme"], opts["dt"], output_stride=int(opts["stride"]))
    traj = integrate(params, PhaseState(q0, p0), opts["t_end"], config, opts.get("kind"))
    n = params.n_dim
    header = ["t"] + [f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)] + ["H", "drift_max"]
    rows = [[t, *q, *p, h, d] for t, q, p, h, d in
            zip(traj.times, traj.q, traj.p, traj.energy, traj.drift_max)]
    if opts["format"] == "json":
        write_json(opts["out"], {"columns": header, "rows": [[float(v) for v in r] for r in rows],
                                 "drift": traj.drift_report})
    else:
        write_csv(opts["out"], header, rows)
    summary = sys.stdout if opts["out"] is not None else sys.stderr
    print(f"manifold: {traj.manifold.tag.value}", file=summary)
    for name, v in traj.drift_report.items():
        print(f"drift {name}: {fmt(v)}", file=summary)
    print(f"drift max: {fmt(max(traj.drift_report.values()))}", file=summary)
    return EXIT_OK


def cmd_verify(opts) -> int:
    params = _params(opts)
    kind = _kind(params, opts)
    report = verify_integrals(params, kind, int(opts["samples"]), opts["seed"])
    rank_lo, rank_hi = min(report.ranks), max(report.ranks)
    if opts["format"] == "json":
        write_json(opts["out"], {
            "kind": kind.value, "samples": report.samples, "tolerance": report.tol,
            "bracket_max": report.bracket_max, "involution_max": report.involution_max,
            "rank": {"min": rank_lo, "max": rank_hi, "expected": report.expected_rank},
            "passed": report.passed,
        })
    else:
        rows = [[f"{{H,{k}}}", v, report.tol, "pass" if v <= report.tol else "FAIL"]
                for k, v in report.bracket_max.items()]
        rows += [[f"involution {k}", v, report.tol, "pass" if v <= report.tol else "FAIL"]
                 for k, v in report.involution_max.items()]
        ok = rank_lo == rank_hi == report.expected_rank
        rows.append(["rank", rank_lo if ok else f"{rank_lo}..{rank_hi}", report.expected_rank,
                     "pass" if ok else "FAIL"])
        write_csv(opts["out"], ["check", "value", "target", "status"],
                  [[r[0], str(r[1]) if isinstance(r[1], int) else r[1],
                    str(r[2]) if isinstance(r[2], int) else r[2], r[3]] for r in rows])
    if not report.passed:
        for name, idx in report.worst_sample.items():
            print(f"worst sample for {name}: index {idx}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_effective_potential(opts) -> int:
    params = _params(opts)
    kind = _kind(params, opts)
    c_n = float(opts["c_n"])
    r = _default_grid(params, kind, opts, 0.5)
    Q = canonical_Q(params, r, kind)
    U = effective_potential(params, r, c_n, kind)
    summary = effective_potential_profile(params, c_n, kind).to_json_dict()
    summary.update({"lambda": params.lam, "omega": params.omega})
    _emit_table(opts, ["r", "Q", "U_eff"], zip(r, Q, U), summary)
    return EXIT_OK


def cmd_curvature(opts) -> int:
    params = _params(opts)
    kind = _kind(params, opts)
    r = _default_grid(params, kind, opts, 0.0)
    R = scalar_curvature(params, r)
    ext = curvature_extrema(params, kind)
    summary = {
        "kind": kind.value, "lambda": params.lam, "n_dim": params.n_dim,
        "r_c": _json_num(params.r_c), "R0": float(scalar_curvature(params, 0.0)),
        "extremum": None if ext is None else {"r": ext[0], "R": ext[1]},
    }
    _emit_table(opts, ["r", "R"], zip(r, np.broadcast_to(R, r.shape)), summary)
    return EXIT_OK


def cmd_spectrum(opts) -> int:
    params = _params(opts)
    req = SpectrumRequest(params, int(opts["levels"]))
    E = energy_levels(params, np.arange(req.n_levels + 1))
    top = asymptote(params)
    rows = [[str(n), E[n], E[n + 1] - E[n], top - E[n]] for n in range(req.n_levels)]
    _emit_table(opts, ["n", "E_n", "gap", "asymptote_residual"], rows,
                {"asymptote": top, "lambda": params.lam, "omega": params.omega,
                 "n_dim": params.n_dim, "hbar": params.hbar})
    return EXIT_OK


def cmd_staeckel_check(opts) -> int:
    params = _params(opts)
    kind = _kind(params, opts)
    report = check_instance(params, kind, int(opts["samples"]), opts["seed"])
    if opts["format"] == "json":
        write_json(opts["out"], {"alpha": report.alpha, "identity_max": report.identity_max,
                                 "bracket_max": report.bracket_max, "passed": report.passed})
    else:
        rows = [["alpha", report.alpha, "", ""]]
        rows += [[k, v, report.identity_tol, "pass" if v <= report.identity_tol else "FAIL"]
                 for k, v in report.identity_max.items()]
        rows += [[k, v, report.bracket_tol, "pass" if v <= report.bracket_tol else "FAIL"]
                 for k, v in report.bracket_max.items()]
        write_csv(opts["out"], ["check", "value", "tolerance", "status"], rows)
    return EXIT_OK if report.passed else EXIT_NUMERIC


COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "effective-potential": cmd_effective_potential,
    "curvature": cmd_curvature,
    "spectrum": cmd_spectrum,
    "staeckel-check": cmd_staeckel_check,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve_options(args)
        params = _params(opts)
        if opts.get("kind") is not None:
            resolve_kind(params, opts["kind"])
    except (ConfigError, ParameterError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](opts)
    except (DomainError, ConvergenceError) as exc:
        t = getattr(exc, "time", None)
        where = f" at t = {fmt(t)}" if t is not None else ""
        print(f"error: {type(exc).__name__}{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DarbouxError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
