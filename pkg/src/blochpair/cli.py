"""Command-line front end.

Subcommands
-----------
simulate
    Integrate a model under a control law and write the trajectory as
    CSV or JSON.
analyze-w
    Check the closed-form factorization drift against the generator
    route and, for the resonant coupling, run the obstruction sweep.
purification-scan
    Evidence harness: report how close the reduced purity of qubit B
    gets to one under seeded random bounded control laws.

Exit codes: 0 success, 2 configuration error, 3 numerical-invariant
failure.  Errors are reported as one-line JSON documents on stderr.
The environment variable ``BLOCHPAIR_OUT`` sets the default output
directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .coherence import embed_factorized
from .dynamics import (
    BoundaryStateError,
    ControlLaw,
    PhysicalityError,
    atomic_write_text,
    integrate,
    purification_scan,
    random_control_laws,
    write_trajectory_csv,
    write_trajectory_json,
)
from .model import TwoQubitModel, load_model
from .protection import (
    COUPLING_TAGS,
    Coupling,
    IncompatibleDissipationError,
    axis1_escape_report,
    compatibility,
    make_model,
    protecting_law,
    resonant_obstruction_report,
    transcription_report,
)
from .quantum import SIGMA_MINUS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

ORACLE_RESIDUAL_LIMIT = 1e-10


class CliConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep config failures on exit code 2 with JSON
        raise CliConfigError(message)


def _emit_error(code: int, message: str, detail: dict | None = None) -> int:
    doc = {"error": {"code": code, "message": message}}
    if detail:
        doc["error"]["detail"] = detail
    print(json.dumps(doc), file=sys.stderr)
    return code


def _default_out(name: str) -> str:
    base = os.environ.get("BLOCHPAIR_OUT", ".")
    return os.path.join(base, name)


def _parse_triple(text: str, flag: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise CliConfigError(f"{flag} expects three comma-separated numbers, got {text!r}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise CliConfigError(f"could not parse {flag}={text!r}: {exc}") from exc


def _load_model_arg(path: str) -> TwoQubitModel:
    if not os.path.exists(path):
        raise CliConfigError(f"model file not found: {path}")
    try:
        return load_model(path)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliConfigError(f"invalid model file {path}: {exc}") from exc


def _initial_state(spec: str) -> np.ndarray:
    if spec == "mixed":
        v = np.zeros(16)
        v[0] = 0.5
        return v
    if spec.startswith("product:"):
        try:
            va_text, vb_text = spec[len("product:") :].split(":")
        except ValueError as exc:
            raise CliConfigError(
                "--v0 product form is product:ax,ay,az:bx,by,bz"
            ) from exc
        va = _parse_triple(va_text, "--v0")
        vb = _parse_triple(vb_text, "--v0")
        return embed_factorized(va, vb).as_array()
    raise CliConfigError(f"unknown --v0 specification {spec!r}")


def _build_law(args, model: TwoQubitModel) -> tuple[ControlLaw, np.ndarray | None]:
    """Returns the law and, for the protecting law, a suggested start state."""
    spec = args.control
    if spec is None:
        return ControlLaw.constant(_parse_triple(args.u0, "--u0")), None
    if spec.startswith("constant:"):
        return ControlLaw.constant(_parse_triple(spec[len("constant:") :], "--control")), None
    if spec.startswith("piecewise:") or spec.startswith("sampled:"):
        kind, path = spec.split(":", 1)
        if not os.path.exists(path):
            raise CliConfigError(f"control file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        try:
            ctor = (
                ControlLaw.piecewise_constant if kind == "piecewise" else ControlLaw.sampled
            )
            return ctor(doc["times"], doc["values"], bound=doc.get("bound")), None
        except (KeyError, ValueError) as exc:
            raise CliConfigError(f"invalid control file {path}: {exc}") from exc
    if spec == "feedback:protect-sigma31":
        for target in (0.5, -0.5):
            ok, _ = compatibility(model, target)
            if ok:
                law = protecting_law(model, target)
                start = embed_factorized(
                    np.array([0.0, 0.0, target]), np.array([0.0, 0.0, 0.5])
                ).as_array()
                return law, start
        raise CliConfigError(
            "protect-sigma31 requires dissipation compatible with vA3 = +1/2 or -1/2 "
            "(v0_3/2 + vA3*d33 = 0)"
        )
    raise CliConfigError(f"unknown --control specification {spec!r}")


def _cmd_simulate(args) -> int:
    model = _load_model_arg(args.model)
    law, suggested_start = _build_law(args, model)
    if args.v0 is not None:
        v0 = _initial_state(args.v0)
    elif suggested_start is not None:
        v0 = suggested_start
    else:
        v0 = _initial_state("mixed")
    if args.step <= 0 or args.horizon < args.step:
        raise CliConfigError("need step > 0 and horizon >= step")
    traj = integrate(model, v0, law, args.horizon, args.step)
    traj.metadata["seed"] = args.seed
    out = args.out or _default_out(f"trajectory.{args.format}")
    if args.format == "csv":
        write_trajectory_csv(traj, out)
    else:
        write_trajectory_json(traj, out)
    summary = {
        "out": out,
        "format": args.format,
        "steps": len(traj) - 1,
        "final_purity_full": float(traj.purity_full[-1]),
        "final_purity_A": float(traj.purity_a[-1]),
        "final_purity_B": float(traj.purity_b[-1]),
        "min_purity_B": float(traj.purity_b.min()),
        "max_purity_B": float(traj.purity_b.max()),
        "model_hash": traj.metadata["model_hash"],
    }
    print(json.dumps(summary))
    return EXIT_OK


def _cmd_analyze_w(args) -> int:
    coupling = Coupling(args.case, args.g)
    model = _load_model_arg(args.model) if args.model else None
    report: dict = {
        "version": __version__,
        "case": args.case,
        "g": args.g,
        "seed": args.seed,
    }
    worst = 0.0
    if args.case in ("dispersive", "resonant"):
        kwargs = {}
        if model is not None:
            kwargs = {
                "omega_a": model.omega_a,
                "omega_b": model.omega_b,
                "jumps": model.jumps,
            }
        osc = transcription_report(coupling, n_samples=args.samples, seed=args.seed, **kwargs)
        report["transcription"] = osc
        worst = osc["max_residual"]
    if args.case == "resonant":
        report["obstruction"] = resonant_obstruction_report(
            args.g,
            grid_step=args.grid_step,
            n_random=args.random_samples,
            seed=args.seed,
            model=model,
        )
    if args.case == "sigma3-sigma1":
        if model is None:
            model = make_model(coupling, omega_a=0.7, omega_b=1.1, jumps=(SIGMA_MINUS,))
        report["axis1_escape"] = axis1_escape_report(model, seed=args.seed)
    out = args.out or _default_out("w_report.json")
    atomic_write_text(out, json.dumps(report, indent=2) + "\n")
    print(json.dumps({"out": out, "max_residual": worst}))
    if worst > ORACLE_RESIDUAL_LIMIT:
        return _emit_error(
            EXIT_NUMERICAL,
            f"transcription residual {worst:.3e} exceeds {ORACLE_RESIDUAL_LIMIT:.1e}",
        )
    return EXIT_OK


def _cmd_purification_scan(args) -> int:
    model = _load_model_arg(args.model)
    horizons = [float(h) for h in args.horizons.split(",")]
    if any(h <= 0 for h in horizons):
        raise CliConfigError("horizons must be positive")
    rng = np.random.default_rng(args.seed)
    laws = [ControlLaw.constant([0.0, 0.0, 0.0], bound=args.bound)]
    laws += random_control_laws(rng, args.laws, args.bound, max(horizons))
    v0 = _initial_state(args.v0 or "mixed")
    report = purification_scan(model, v0, laws, horizons, args.step)
    report["seed"] = args.seed
    report["bound"] = args.bound
    report["model_hash"] = model.hash_hex()
    out = args.out or _default_out("purification_scan.json")
    atomic_write_text(out, json.dumps(report, indent=2) + "\n")
    print(json.dumps({"out": out, "min_margin": report["min_margin"]}))
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="blochpair", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate a model and export the trajectory")
    sim.add_argument("--model", required=True, help="model JSON file")
    sim.add_argument("--horizon", type=float, default=20.0)
    sim.add_argument("--step", type=float, default=1e-3)
    sim.add_argument("--u0", default="0,0,0", help="constant control a,b,c")
    sim.add_argument("--control", default=None, help="constant:a,b,c | piecewise:FILE | sampled:FILE | feedback:protect-sigma31")
    sim.add_argument("--v0", default=None, help="mixed | product:ax,ay,az:bx,by,bz")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default=None)
    sim.add_argument("--format", choices=("csv", "json"), default="csv")
    sim.set_defaults(func=_cmd_simulate)

    ana = sub.add_parser("analyze-w", help="drift transcription oracle and obstruction sweep")
    ana.add_argument("--case", required=True, choices=COUPLING_TAGS)
    ana.add_argument("--g", type=float, default=1.0)
    ana.add_argument("--model", default=None, help="optional model JSON supplying dissipation")
    ana.add_argument("--samples", type=int, default=500)
    ana.add_argument("--grid-step", type=float, default=0.05)
    ana.add_argument("--random-samples", type=int, default=10_000)
    ana.add_argument("--seed", type=int, default=0)
    ana.add_argument("--out", default=None)
    ana.set_defaults(func=_cmd_analyze_w)

    scan = sub.add_parser("purification-scan", help="reduced-purity margins under random laws")
    scan.add_argument("--model", required=True)
    scan.add_argument("--laws", type=int, default=10, help="number of random laws (plus u = 0)")
    scan.add_argument("--bound", type=float, default=1.0)
    scan.add_argument("--horizons", default="10,20,40")
    scan.add_argument("--step", type=float, default=1e-3)
    scan.add_argument("--seed", type=int, default=0)
    scan.add_argument("--v0", default=None)
    scan.add_argument("--out", default=None)
    scan.set_defaults(func=_cmd_purification_scan)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliConfigError as exc:
        return _emit_error(EXIT_CONFIG, str(exc))
    except BoundaryStateError as exc:
        return _emit_error(EXIT_CONFIG, str(exc))
    except IncompatibleDissipationError as exc:
        return _emit_error(EXIT_CONFIG, str(exc))
    except ValueError as exc:
        return _emit_error(EXIT_CONFIG, str(exc))
    except PhysicalityError as exc:
        return _emit_error(EXIT_NUMERICAL, str(exc), {"t": exc.t, "defect": exc.defect})


if __name__ == "__main__":
    sys.exit(main())
