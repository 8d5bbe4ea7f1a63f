"""Command-line front end: ``geonl {simulate,borninfeld,tetrad,validate,list}``.

Exit codes: 0 ok, 2 parse error, 3 semantic error, 4 numerical failure,
5 I/O failure.  Every failure prints a single ``error[<class>]: <reason>``
line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import borninfeld, dynamics, frames, scenario, tetrad
from .energetics import ModelKind
from .errors import GeonlError, NumericalError, ParseError, SemanticError, SingularityApproached

log = logging.getLogger("geonl")

EXIT_OK, EXIT_PARSE, EXIT_SEMANTIC, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4, 5

SUBCOMMAND_KIND = {"simulate": "affine_sim", "borninfeld": "born_infeld", "tetrad": "tetrad_eval"}


def _fmt(x) -> str:
    """Shortest round-trip decimal for floats."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path: Path, data):
    clean = {k: _json_value(v) for k, v in data.items()}
    path.write_text(json.dumps(clean, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# runners


def run_affine(sc: scenario.Scenario, out: Path, seed: int) -> dict:
    block = sc.block
    n = scenario.affine_dimension(block)
    model = scenario.build_model(block, n)
    pot = scenario.build_potential(block)
    state0 = scenario.build_initial(block, n, np.random.default_rng(seed))
    cfg = scenario.build_integrator(block)
    status, error = "completed", None
    try:
        traj = dynamics.integrate(model, pot, state0, block["tspan"], cfg)
    except SingularityApproached as exc:
        traj, status, error = exc.trajectory, "singularity", exc
        if traj is None:
            raise
    header = (["t"] + [f"x{i + 1}" for i in range(n)]
              + [f"phi{a + 1}{b + 1}" for a in range(n) for b in range(n)]
              + [f"q{i + 1}" for i in range(n)] + ["energy", "casimir", "det_phi", "q_spread"])
    casimir = traj.casimir if traj.casimir is not None else np.full(len(traj), math.nan)
    rows = (
        [traj.times[i], *traj.x[i], *traj.phi[i].ravel(), *traj.q[i],
         traj.energy[i], casimir[i], traj.det_phi[i], traj.q_spread[i]]
        for i in range(len(traj))
    )
    _write_csv(out / f"{sc.name}.csv", header, rows)
    report = dynamics.conservation_report(traj, model, pot,
                                          volume_preserving=block.get("volume_preserving", False))
    summary = {
        "kind": sc.kind,
        "model": model.kind.value,
        "status": status,
        "samples": len(traj),
        "steps_accepted": traj.steps_accepted,
        "steps_rejected": traj.steps_rejected,
        "t_final": float(traj.times[-1]),
        "classification": dynamics.classify_motion(traj, horizon=block.get("horizon")),
        "seed": seed,
        **report.as_dict(),
    }
    _write_json(out / f"{sc.name}_summary.json", summary)
    if error is not None:
        raise error
    return summary


def _radii(block) -> np.ndarray:
    if "r" in block:
        return np.asarray(block["r"], dtype=float)
    g = block["r_grid"]
    return np.linspace(float(g["start"]), float(g["stop"]), int(g["num"]))


def run_born_infeld(sc: scenario.Scenario, out: Path, seed: int) -> dict:
    block = sc.block
    field = borninfeld.RadialBIField(float(block["e"]), float(block["b"]))
    r = _radii(block)
    E, phi = borninfeld.radial_solution(field, r)
    omega = borninfeld.energy_density(field, r)
    _write_csv(out / f"{sc.name}.csv", ["r", "E", "phi", "omega"],
               zip(r, np.atleast_1d(E), np.atleast_1d(phi), np.atleast_1d(omega)))
    r_max = block.get("r_max", "inf")
    r_max = math.inf if r_max == "inf" else float(r_max)
    summary = {
        "kind": sc.kind,
        "e": field.e_charge,
        "b": field.b,
        "r0": field.r0,
        "total_energy": borninfeld.total_energy(field, r_max, float(block.get("r_min", 0.0))),
        "r_max": r_max,
        "seed": seed,
    }
    _write_json(out / f"{sc.name}_summary.json", summary)
    return summary


def run_tetrad(sc: scenario.Scenario, out: Path, seed: int) -> dict:
    block = sc.block
    frame = frames.builtin_frame(block["frame"], **block.get("params", {}))
    n = frame.n
    eta = block.get("eta", "minkowski")
    if eta == "minkowski":
        eta = tetrad.minkowski(n)
    elif eta == "euclidean":
        eta = np.eye(n)
    else:
        eta = np.asarray(eta, dtype=float)
    A, B, C = (float(block.get(k, d)) for k, d in (("A", 1.0), ("B", 0.0), ("C", 0.0)))
    rows = []
    for x in np.asarray(block["points"], dtype=float):
        inv = tetrad.weitzenbock_invariants(frame, x, eta)
        _, density = tetrad.lagrange_tensor(frame, x, A, B, C)
        res = tetrad.hilbert_identity_residual(frame, x, eta)
        rows.append([*x, inv.J1, inv.J2, inv.J3, inv.Lprime, density, res])
    header = [f"x{i + 1}" for i in range(n)] + ["J1", "J2", "J3", "Lprime", "L_density", "identity_residual"]
    _write_csv(out / f"{sc.name}.csv", header, rows)
    summary = {
        "kind": sc.kind,
        "frame": block["frame"],
        "points": len(rows),
        "max_abs_identity_residual": max(abs(r[-1]) for r in rows),
        "seed": seed,
    }
    _write_json(out / f"{sc.name}_summary.json", summary)
    return summary


RUNNERS = {"affine_sim": run_affine, "born_infeld": run_born_infeld, "tetrad_eval": run_tetrad}


def run_scenario(path, out, seed=None, expected_kind=None) -> dict:
    """Validate and run one scenario file, writing outputs into ``out``."""
    sc = scenario.load_scenario(path)
    if expected_kind is not None and sc.kind != expected_kind:
        raise SemanticError([f"kind: expected {expected_kind!r} for this subcommand, got {sc.kind!r}"])
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    run_seed = seed if seed is not None else (sc.seed if sc.seed is not None else 0)
    return RUNNERS[sc.kind](sc, out, run_seed)


def list_builtins() -> dict:
    return {
        "models": [k.value for k in ModelKind],
        "potentials": list(scenario.POTENTIALS),
        "frames": list(frames.BUILTIN_FRAMES),
        "lagrangians": [k.value for k in borninfeld.LagrangianKind],
        "integrators": list(scenario.METHODS),
        "scenario_kinds": list(scenario.KINDS),
    }


# --------------------------------------------------------------------------
# entry point


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(exc, (SemanticError, ValueError, GeonlError)):
        return EXIT_SEMANTIC
    if isinstance(exc, OSError):
        return EXIT_IO
    raise exc


def _error_line(exc: BaseException) -> str:
    label = {EXIT_PARSE: "parse", EXIT_SEMANTIC: "semantic", EXIT_NUMERICAL: "numerical",
             EXIT_IO: "io"}[exit_code(exc)]
    reason = " ".join(str(exc).split()) or type(exc).__name__
    return f"error[{label}]: {type(exc).__name__}: {reason}"


def _guarded(fn, *args):
    try:
        return EXIT_OK, fn(*args)
    except (GeonlError, ValueError, OSError) as exc:
        return exit_code(exc), _error_line(exc)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geonl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "integrate affine-body scenarios"),
                        ("borninfeld", "tabulate the Born-Infeld point charge"),
                        ("tetrad", "evaluate frame invariants at points")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--scenario", required=True, nargs="+", metavar="PATH")
        p.add_argument("--out", default=".", metavar="DIR")
        p.add_argument("--batch", type=int, default=1, metavar="N",
                       help="number of scenarios run concurrently")
        p.add_argument("--seed", type=int, default=None, metavar="U64")
    p = sub.add_parser("validate", help="check scenario files without running them")
    p.add_argument("--scenario", required=True, nargs="+", metavar="PATH")
    p = sub.add_parser("list", help="list built-in models, potentials and frames")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "list":
        items = list_builtins()
        if args.json:
            print(json.dumps(items, indent=2))
        else:
            for key, vals in items.items():
                print(f"{key}: {', '.join(vals)}")
        return EXIT_OK

    if args.command == "validate":
        worst = EXIT_OK
        for path in args.scenario:
            code, res = _guarded(scenario.load_scenario, path)
            if code:
                print(f"{path}: {res}", file=sys.stderr)
                worst = worst or code
            else:
                print(f"{path}: ok ({res.kind})")
        return worst

    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error[semantic]: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_SEMANTIC
    if args.batch < 1:
        print("error[semantic]: --batch must be at least 1", file=sys.stderr)
        return EXIT_SEMANTIC
    kind = SUBCOMMAND_KIND[args.command]

    def one(path):
        log.info("running %s", path)
        return _guarded(run_scenario, path, args.out, args.seed, kind)

    with ThreadPoolExecutor(max_workers=args.batch) as pool:
        results = list(pool.map(one, args.scenario))
    worst = EXIT_OK
    for path, (code, res) in zip(args.scenario, results):
        if code:
            print(res if len(args.scenario) == 1 else f"{path}: {res}", file=sys.stderr)
            worst = worst or code
        else:
            log.info("%s: %s", path, res)
    return worst


if __name__ == "__main__":
    sys.exit(main())
