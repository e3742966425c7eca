"""Command-line interface.

Every command prints one JSON envelope::

    {"schema_version": ..., "command": ..., "parameters": {...},
     "payload": {...}, "provenance": {"timestamp": ..., "version": ...}}

Tabular data (branch samples, trajectories, grid fields) go to CSV files
named by ``--csv`` / ``--out``.  Failures print an error record with the same
top-level keys plus ``error`` and exit with status 1 (2 for usage errors).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .continuation import StepControl, family_state, sweep_ground_diagram
from .dynamics import DynamicsConfig, evolve, verify_conservation
from .errors import ConvergenceError, DomainError, NModeError
from .lattice import build_hopping_matrix, hypercube, spectrum_dense, spectrum_recursive
from .potential import (GridSpec, LatticeGeometry, WellProfile, agmon_s0, bump_profile, mass_fraction,
                        reconstruct_wavefunction, truncated_parabola)
from .stationary import (ModeState, NewtonConfig, StationaryParams, closed_form_1d, closed_form_2d_mirror,
                         closed_form_2d_point, jacobian_positive, residual_positive, solve_newton,
                         symmetric_solution)
from .symmetry import named_class

SCHEMA_VERSION = "1.0"

log = logging.getLogger("nmode")

SEEDS = ("symmetric", "asym", "mirror", "point", "F23Ter", "F23Ter-branch-a", "F23Ter-branch-b",
         "F27", "F27-branch-a", "F27-branch-b", "F28", "F28-branch-c", "F28-branch-d", "file")

# family name -> (dimension, symmetry class, default sub-branch)
_FAMILY_SEEDS = {"F23Ter": (2, "partial2d", "b"), "F27": (3, "F27", "b"), "F28": (3, "F28", "d")}


class UsageError(NModeError):
    """Bad command-line input detected after parsing."""


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors as JSON records."""

    def error(self, message):
        _emit_error("usage", UsageError(message), {}, status=2)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def envelope(command: str, parameters: dict, payload: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "parameters": parameters,
        "payload": payload,
        "provenance": {"timestamp": _now(), "version": __version__, "backend": BACKEND},
    }


def load_schema(name: str = "envelope") -> dict:
    """Published JSON schema: ``envelope`` or ``error``."""
    from importlib.resources import files
    return json.loads(files("nmode").joinpath("schema", f"{name}.schema.json").read_text())


def dumps(obj) -> str:
    return json.dumps(obj, default=_jsonable, indent=2, sort_keys=False)


def _emit_error(command: str, exc: Exception, parameters: dict, status: int = 1):
    err = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConvergenceError) and exc.residual is not None:
        err["residual"] = float(exc.residual)
    rec = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "parameters": parameters,
        "error": err,
        "provenance": {"timestamp": _now(), "version": __version__, "backend": BACKEND},
    }
    sys.stdout.write(dumps(rec) + "\n")
    sys.exit(status)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _physical(args) -> tuple[float, float, float]:
    """``(lambda_D, beta, hbar)`` honouring ``--units``."""
    given = {k: getattr(args, k, None) for k in ("lambda_D", "beta", "hbar")}
    if args.units == "reduced":
        bad = [k for k, v in given.items() if v is not None and v != {"lambda_D": 0.0, "beta": 1.0,
                                                                        "hbar": 1.0}[k]]
        if bad:
            raise UsageError(f"{', '.join(bad)} can only be changed with --units raw")
        return 0.0, 1.0, 1.0
    lam = 0.0 if given["lambda_D"] is None else given["lambda_D"]
    beta = 1.0 if given["beta"] is None else given["beta"]
    hbar = 1.0 if given["hbar"] is None else given["hbar"]
    if not beta > 0 or not hbar > 0:
        raise UsageError("beta and hbar must be positive")
    return lam, beta, hbar


def _reduced_eta(args) -> float:
    """``eta`` from ``--eta`` (reduced) or ``--epsilon-c / beta`` (raw)."""
    if args.units == "raw" and getattr(args, "epsilon_c", None) is not None:
        _, beta, _ = _physical(args)
        return args.epsilon_c / beta
    if args.eta is None:
        raise UsageError("--eta is required" + (" (or --epsilon-c with --units raw)" if args.units == "raw" else ""))
    return args.eta


# ---------------------------------------------------------------- commands

def cmd_spectrum(args) -> dict:
    if args.d < 1:
        raise UsageError("--d must be at least 1")
    if not args.beta > 0:
        raise UsageError("--beta must be positive")
    if args.method == "recursive":
        s = spectrum_recursive(args.d, args.lambda_D, args.beta)
        return {"method": "recursive", "values": s.values, "multiplicities": s.multiplicities}
    T = build_hopping_matrix(hypercube(args.d), args.lambda_D, args.beta)
    s, w, vecs = spectrum_dense(T, return_vectors=True)
    # eigenvectors listed one per row, matching "eigenvalues"
    return {"method": "dense", "values": s.values, "multiplicities": s.multiplicities,
            "eigenvalues": w, "eigenvectors": vecs.T}


def _seed_state(d: int, sigma: int, eta: float, seed: str, seed_file: str | None):
    """Initial ``(q, Omega, symmetry)`` for a named seed selector."""
    spec = hypercube(d)
    if seed == "symmetric":
        q, Om = symmetric_solution(d, sigma, eta)
        return q, Om, named_class("full", spec)
    if seed == "file":
        if not seed_file:
            raise UsageError("--seed file needs --seed-file PATH")
        data = json.loads(Path(seed_file).read_text())
        q = np.asarray(data["q"], dtype=float)
        if q.size != spec.size:
            raise UsageError(f"seed file has {q.size} occupations, lattice has {spec.size}")
        Om = float(data.get("Omega", symmetric_solution(d, sigma, eta)[1]))
        sym = data.get("symmetry")
        return q / q.sum(), Om, named_class(sym, spec) if sym else None
    closed = {"asym": (1, closed_form_1d, "none"), "mirror": (2, closed_form_2d_mirror, "mirror2d"),
              "point": (2, closed_form_2d_point, "point2d")}
    if seed in closed:
        dim, fn, cls = closed[seed]
        if d != dim:
            raise UsageError(f"seed {seed!r} needs --d {dim}")
        roots = fn(eta, sigma)
        if not roots:
            raise DomainError(f"no {seed} state exists at eta={eta} for sigma={sigma}")
        # the orientation with the last site more occupied, as tabulated for d=1
        root = min(roots, key=lambda r: r.z) if seed == "asym" else max(roots, key=lambda r: r.z)
        return root.q, root.Omega, named_class(cls, spec)
    family, _, part = seed.partition("-branch-")
    if family not in _FAMILY_SEEDS:
        raise UsageError(f"unknown seed {seed!r}; choose from {', '.join(SEEDS)}")
    dim, cls, default = _FAMILY_SEEDS[family]
    if d != dim:
        raise UsageError(f"seed {seed!r} needs --d {dim}")
    part = part or default
    sub = {"a": "a", "b": "b", "c": "a", "d": "b"}[part]
    q, Om = family_state(d, sigma, family, eta, sub)
    return q, Om, named_class(cls, spec)


def _solve(d, sigma, eta, seed, seed_file, tol, max_iter):
    spec = hypercube(d)
    q0, Om0, cls = _seed_state(d, sigma, eta, seed, seed_file)
    params = StationaryParams(sigma, eta)
    res = solve_newton(q0, Om0, params, spec, NewtonConfig(tol=tol, max_iter=max_iter, cond_max=np.inf),
                       symmetry=cls)
    r = residual_positive(res.q, StationaryParams(sigma, eta, res.Omega), spec)
    det = float(np.linalg.det(jacobian_positive(res.q, params, spec)))
    return res, float(np.max(np.abs(r))), det, cls


def cmd_solve(args) -> dict:
    if args.d < 1:
        raise UsageError("--d must be at least 1")
    _physical(args)
    eta = _reduced_eta(args)
    res, rnorm, det, cls = _solve(args.d, args.sigma, eta, args.seed, args.seed_file, args.tol, args.max_iter)
    out = {"eta": eta, "sigma": args.sigma, "q": res.q, "Omega": res.Omega, "residual_norm": rnorm,
           "jacobian_det": det, "iterations": res.iterations,
           "symmetry": cls.label if cls is not None else "none"}
    if args.units == "raw":
        lam, beta, hbar = _physical(args)
        out["omega"] = (beta * res.Omega + lam) / hbar
    return out


def cmd_continue(args) -> dict:
    if args.units == "raw":
        raise UsageError("continuation diagrams are computed in reduced (eta, Omega) variables only")
    if args.eta_min >= args.eta_max:
        raise UsageError("--eta-min must be below --eta-max")
    if not 0 < args.step_min <= args.step_initial <= args.step_max:
        raise UsageError("step sizes must satisfy 0 < min <= initial <= max")
    step = StepControl(args.step_initial, args.step_min, args.step_max)
    D = sweep_ground_diagram(hypercube(args.d), args.sigma, (args.eta_min, args.eta_max), step,
                             max_branches=args.max_branches, threads=args.threads)
    n = 2 ** args.d
    if args.csv:
        rows = []
        for bid, br in enumerate(D.branches):
            for p in br.points:
                rows.append([bid, br.symmetry.label, p.eta, p.Omega, *p.q, p.det_sign])
        _write_csv(args.csv, ["branch_id", "symmetry", "eta", "Omega", *[f"q_{j + 1}" for j in range(n)],
                              "det_sign"], rows)
    branches = [{"branch_id": i, "symmetry": b.symmetry.label, "blocks": [list(x) for x in b.symmetry.blocks],
                 "origin": b.origin, "termination": b.termination, "n_points": len(b),
                 "eta_min": float(b.etas.min()), "eta_max": float(b.etas.max())}
                for i, b in enumerate(D.branches)]
    events = []
    for k, (bid, ev) in enumerate(D.events):
        events.append({"kind": ev.kind, "eta": ev.eta_star, "Omega": ev.Omega_star, "q": ev.q_star,
                       "branch_id": bid, "even_multiplicity": ev.even,
                       "branch_count": D.branch_counts.get(k)})
    unique = [{"kind": ev.kind, "eta": ev.eta_star} for _, ev in D.unique_events()]
    return {"branches": branches, "events": events, "unique_events": unique,
            "csv": str(args.csv) if args.csv else None}


def _initial_state(args, n: int, eta: float):
    src = args.initial
    if src == "ground":
        return np.full(n, 1 / np.sqrt(n), dtype=complex)
    if src.startswith("site:"):
        k = int(src.split(":", 1)[1])
        if not 0 <= k < n:
            raise UsageError(f"site index {k} out of range for {n} wells")
        d0 = np.zeros(n, dtype=complex)
        d0[k] = 1.0
        return d0
    if src.startswith("file:"):
        data = json.loads(Path(src.split(":", 1)[1]).read_text())
        if "re" in data:
            d0 = np.asarray(data["re"], float) + 1j * np.asarray(data.get("im", np.zeros(len(data["re"]))), float)
        else:
            d0 = ModeState(np.asarray(data["q"], float), np.asarray(data.get("theta", np.zeros(n)), float)).coefficients
        if d0.size != n:
            raise UsageError(f"initial state has {d0.size} entries, lattice has {n}")
        return d0
    if src == "stationary":
        res, _, _, _ = _solve(args.d, args.sigma, eta, args.seed, args.seed_file, 1e-13, 60)
        return np.sqrt(res.q).astype(complex)
    raise UsageError(f"unknown initial state source {src!r}")


def cmd_dynamics(args) -> dict:
    lam, beta, hbar = _physical(args)
    if args.units == "raw":
        epsc = 0.0 if args.epsilon_c is None else args.epsilon_c
    else:
        epsc = 0.0 if args.eta is None else args.eta
    eta = epsc / beta
    n = 2 ** args.d
    T = build_hopping_matrix(hypercube(args.d), lam, beta)
    d0 = _initial_state(args, n, eta)
    cfg = DynamicsConfig(hbar=hbar, epsilon_c=epsc, sigma=args.sigma, t_span=(0.0, args.t_end),
                         dt_initial=args.dt_initial, rel_tol=args.rtol, abs_tol=args.atol)
    tr = evolve(d0, T, cfg, n_samples=args.samples)
    rep = verify_conservation(tr)
    if args.csv:
        rows = [[t, *qq, nn, hh] for t, qq, nn, hh in zip(tr.times, tr.q, tr.norms, tr.energies)]
        _write_csv(args.csv, ["t", *[f"q_{j + 1}" for j in range(n)], "norm", "H"], rows)
    out = {"n_samples": len(tr.times), "n_accepted": tr.n_accepted, "n_rejected": tr.n_rejected,
           "conservation": {"max_norm_drift": rep.max_norm_drift, "max_H_drift": rep.max_H_drift, "H0": rep.H0},
           "q_final": tr.q[-1], "max_q_drift": float(np.max(np.abs(tr.q - tr.q[0]))),
           "csv": str(args.csv) if args.csv else None}
    if not args.csv:
        out["times"] = tr.times
        out["q"] = tr.q
    return out


def _profile(args) -> WellProfile:
    src = args.profile
    if src == "parabola":
        return truncated_parabola(args.depth, args.radius)
    if src == "bump":
        return bump_profile(args.depth, args.radius)
    if src.startswith("table:"):
        data = np.loadtxt(src.split(":", 1)[1], delimiter=",", skiprows=1, ndmin=2)
        return WellProfile.from_table(data[:, 0], data[:, 1])
    raise UsageError(f"unknown profile {src!r}; use parabola, bump or table:PATH")


def write_binary_grid(path, grid: GridSpec, values: np.ndarray) -> None:
    """JSON header line, then the raw samples as little-endian float64 in C order."""
    header = {"shape": list(values.shape), "lower": list(grid.lower), "upper": list(grid.upper),
              "spacing": list(grid.spacing), "dtype": "<f8", "order": "C"}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_binary_grid(path) -> tuple[dict, np.ndarray]:
    raw = Path(path).read_bytes()
    cut = raw.index(b"\n")
    header = json.loads(raw[:cut])
    values = np.frombuffer(raw[cut + 1:], dtype=header["dtype"]).reshape(header["shape"])
    return header, values


def cmd_reconstruct(args) -> dict:
    spec = hypercube(args.d)
    if args.state_file:
        data = json.loads(Path(args.state_file).read_text())
        q = np.asarray(data["q"], float)
        if q.size != spec.size:
            raise UsageError(f"state has {q.size} occupations, geometry has {spec.size} wells")
        state = ModeState(q, np.asarray(data.get("theta", np.zeros(q.size)), float))
    else:
        if args.eta is None:
            raise UsageError("--eta is required unless --state-file is given")
        res, _, _, _ = _solve(args.d, 1 if args.sigma is None else args.sigma, args.eta, args.seed, None, 1e-13, 60)
        state = ModeState(res.q, np.zeros(spec.size))
    profile = _profile(args)
    geom = LatticeGeometry(args.spacing, spec)
    margin = args.spacing / 2 if args.margin is None else args.margin
    grid = GridSpec.covering(geom, margin, args.grid_n)
    field = reconstruct_wavefunction(state, geom, profile, args.hbar, grid)
    if args.out:
        if args.format == "binary":
            write_binary_grid(args.out, grid, field.values)
        else:
            pts = grid.points().reshape(-1, spec.dims)
            rows = [[*x, v] for x, v in zip(pts, field.values.ravel())]
            _write_csv(args.out, [*[f"x_{k + 1}" for k in range(spec.dims)], "abs_psi"], rows)
    fractions = [mass_fraction(field, geom, j) for j in range(spec.size)]
    return {"q": state.q, "grid": {"lower": grid.lower, "upper": grid.upper, "n": grid.n},
            "max_abs_psi": float(field.values.max()), "argmax": field.argmax_point(),
            "total_mass": field.total_mass(), "cell_mass_fractions": fractions,
            "dominant_site": int(np.argmax(fractions)), "output": str(args.out) if args.out else None,
            "format": args.format}


def cmd_agmon(args) -> dict:
    profile = _profile(args)
    s0, err = agmon_s0(profile, args.b, return_error=True)
    return {"S0": s0, "error_estimate": err, "b": args.b, "support_radius": profile.support_radius,
            "v_min": profile.v_min}


# ---------------------------------------------------------------- parser

def _common(p, physical=True):
    p.add_argument("--d", type=int, default=1, help="lattice dimension (2^d wells)")
    p.add_argument("--sigma", type=int, default=1, help="nonlinearity exponent")
    if physical:
        p.add_argument("--lambda-D", dest="lambda_D", type=float, default=None)
        p.add_argument("--beta", type=float, default=None)
        p.add_argument("--hbar", type=float, default=None)
        p.add_argument("--epsilon-c", dest="epsilon_c", type=float, default=None,
                       help="nonlinearity eps*c (with --units raw)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nmode", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nmode {__version__}")
    parser.add_argument("--config", help="JSON file of default flag values (keys are flag names)")
    parser.add_argument("--units", choices=("reduced", "raw"), default="reduced")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (env NMODE_THREADS)")
    parser.add_argument("--output", "-o", help="write the JSON envelope here instead of stdout")
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spectrum", help="eigenvalues of the hopping matrix")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--lambda-D", dest="lambda_D", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--method", choices=("recursive", "dense"), default="recursive")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("solve", help="one stationary state by Newton's method")
    _common(p)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--seed", choices=SEEDS, default="symmetric")
    p.add_argument("--seed-file", default=None, help="JSON with q, Omega and optional symmetry")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=60)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("continue", help="bifurcation diagram by continuation in eta")
    _common(p, physical=False)
    p.add_argument("--eta-min", type=float, default=-9.0)
    p.add_argument("--eta-max", type=float, default=0.0)
    p.add_argument("--step-initial", type=float, default=1e-2)
    p.add_argument("--step-min", type=float, default=1e-8)
    p.add_argument("--step-max", type=float, default=0.1)
    p.add_argument("--max-branches", type=int, default=64)
    p.add_argument("--csv", default=None, help="branch samples CSV path")
    p.set_defaults(func=cmd_continue)

    p = sub.add_parser("dynamics", help="integrate the N-mode equations in time")
    _common(p)
    p.add_argument("--eta", type=float, default=None, help="reduced nonlinearity eps*c/beta")
    p.add_argument("--initial", default="ground", help="ground | site:K | stationary | file:PATH")
    p.add_argument("--seed", choices=SEEDS, default="symmetric", help="seed for --initial stationary")
    p.add_argument("--seed-file", default=None)
    p.add_argument("--t-end", type=float, default=20.0)
    p.add_argument("--samples", type=int, default=201)
    p.add_argument("--dt-initial", type=float, default=1e-3)
    p.add_argument("--rtol", type=float, default=1e-10)
    p.add_argument("--atol", type=float, default=1e-12)
    p.add_argument("--csv", default=None, help="trajectory CSV path")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("reconstruct", help="approximate wavefunction on a grid")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--sigma", type=int, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--seed", choices=SEEDS, default="symmetric")
    p.add_argument("--state-file", default=None, help="JSON with q and optional theta")
    p.add_argument("--spacing", type=float, default=4.0, help="well spacing b")
    p.add_argument("--hbar", type=float, default=0.1)
    p.add_argument("--profile", default="bump", help="bump | parabola | table:PATH (CSV r,f)")
    p.add_argument("--depth", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--grid-n", type=int, default=81, help="samples per axis")
    p.add_argument("--margin", type=float, default=None, help="grid margin around the wells (default b/2)")
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    p.add_argument("--out", default=None, help="field output path")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("agmon", help="semiclassical tunnelling action S0")
    p.add_argument("--profile", default="parabola", help="bump | parabola | table:PATH (CSV r,f)")
    p.add_argument("--depth", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--b", type=float, default=4.0, help="well spacing")
    p.set_defaults(func=cmd_agmon)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = json.loads(Path(known.config).read_text())
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    parser.set_defaults(**{k: v for k, v in cfg.items() if k in ("units", "threads", "output")})
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            dests = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in cfg.items() if k in dests})


def _parameters(args) -> dict:
    skip = {"func", "config", "output", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (OSError, ValueError, NModeError) as exc:
        _emit_error("config", exc, {}, status=2)
    args = parser.parse_args(argv)
    if args.threads is None:
        args.threads = int(os.environ.get("NMODE_THREADS", "1"))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    params = _parameters(args)
    try:
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        payload = args.func(args)
    except UsageError as exc:
        _emit_error(args.command, exc, params, status=2)
    except (NModeError, ValueError, OSError, KeyError) as exc:
        _emit_error(args.command, exc, params, status=1)
    text = dumps(envelope(args.command, params, payload)) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
