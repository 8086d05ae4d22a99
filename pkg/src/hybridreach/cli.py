"""Command-line front end.

    hybridreach validate --instance e4
    hybridreach simulate --instance e4 --tmax 10 --out traj.csv
    hybridreach solve    --instance e2 --dx 0.01 --dt 0.005 --out run/
    hybridreach verify   --instance e4 --samples 1000 --out verify.json
    hybridreach export   --instance e4 --dx 0.05 --out grid/

``--instance`` takes a file path or the name of a bundled instance.

Exit codes: 0 success, 1 verification failure or runtime model error,
2 schema/configuration error, 3 assumption failure under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError, HybridError, InputError
from .instance import Instance, SchemaError, bundled, bundled_names, load_instance
from .model import estimate_constants, validate_assumptions
from .solver import (
    CLASS_NAMES,
    Grid,
    extract_policy,
    solve_qvi,
    write_policy_csv,
    write_report_json,
    write_value_csv,
)
from .trajectory import evaluate_cost, simulate, write_trajectory_csv
from .verification import (
    FAIL,
    bound_suite,
    check_uniqueness,
    check_value_bound,
    dpp_sample,
    estimate_holder,
    operator_properties,
)

logger = logging.getLogger("hybridreach")

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_ASSUMPTION = 0, 1, 2, 3
COMMANDS = ("validate", "simulate", "solve", "verify", "export")


@dataclass
class RunConfig:
    command: str
    instance: str
    dx: float = 0.01
    dt: float | None = None
    tol: float = 1e-8
    tmax: float = 20.0
    sim_dt: float = 0.01
    seed: int = 0
    threads: int = 1
    max_iter: int = 200_000
    samples: int = 1000
    strict: bool = False
    out: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        for name in ("dx", "tol", "tmax", "sim_dt"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"--{name.replace('_', '-')} must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ConfigurationError("--dt must be positive")
        if self.threads < 1 or self.max_iter < 1 or self.samples < 1:
            raise ConfigurationError("--threads, --max-iter and --samples must be at least 1")

    def solver_dt(self, F: float) -> float:
        """``dt`` for the value iteration: the given one, or ``min(dx/2, dx/F)``."""
        if self.dt is not None:
            return self.dt
        return self.dx / 2 if F <= 0 else min(self.dx / 2, self.dx / F)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k not in ("extra", "out")}
        return d


def _load(entry: str) -> Instance:
    path = Path(entry)
    if path.exists():
        return load_instance(path)
    if entry in bundled_names():
        return bundled(entry)
    raise SchemaError(f"no such file, and not a bundled instance (have {', '.join(bundled_names())})", entry)


def _write_json(payload: dict, out: str | None, default_name: str) -> Path | None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
        return None
    path = Path(out)
    if path.is_dir():
        path = path / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _meta() -> dict:
    return {"timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"), "version": __version__}


# --------------------------------------------------------------------------- commands


def cmd_validate(cfg: RunConfig, inst: Instance) -> int:
    """Check the structural assumptions and write a JSON report."""
    report = validate_assumptions(inst.system, samples=cfg.extra.get("validate_samples", 200), seed=cfg.seed)
    payload = {"instance": inst.system.name, "seed": cfg.seed, **report.to_dict(), "meta": _meta()}
    _write_json(payload, cfg.out, "validation.json")
    for c in report.failures():
        print(f"{c.name}: failed (witness {c.witness:.6g}, threshold {c.threshold:.6g}) {c.detail}", file=sys.stderr)
    return EXIT_ASSUMPTION if (cfg.strict and not report.passed) else EXIT_OK


def cmd_simulate(cfg: RunConfig, inst: Instance) -> int:
    """Simulate the instance's policy; trajectory CSV plus a JSON summary."""
    if inst.initial is None or inst.policy is None:
        raise ConfigurationError("simulate needs an instance with 'initial' and 'policy' entries")
    x0, q0 = inst.initial
    traj = simulate(inst.system, x0, q0, inst.policy, cfg.tmax, cfg.sim_dt)
    cost = evaluate_cost(inst.system, traj, inst.policy)
    out = Path(cfg.out or "trajectory.csv")
    if out.is_dir():
        out = out / "trajectory.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(traj, out)
    summary = {
        "instance": inst.system.name,
        "reached": traj.reached,
        "reach_time": traj.reach_time if traj.reached else None,
        "events": [{"t": e.t, "kind": e.tag, "mode": e.q} for e in traj.events],
        "cost": {**cost.__dict__, "total": cost.value},
        "dwell_violations": traj.dwell_violations,
    }
    out.with_suffix(".json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"J = {cost.value:.12g}; reach time {traj.reach_time:.12g}; wrote {out}")
    return EXIT_OK


def cmd_solve(cfg: RunConfig, inst: Instance) -> int:
    """Solve for the value function; value/policy CSVs and report.json."""
    system = inst.system
    consts = estimate_constants(system, require_transversality=False)
    dt = cfg.solver_dt(consts.F)
    grid = Grid.build(system, cfg.dx)
    field_, report = solve_qvi(system, grid, dt, tol=cfg.tol, max_iter=cfg.max_iter)
    out = Path(cfg.out or "solve")
    out.mkdir(parents=True, exist_ok=True)
    write_value_csv(field_, out)
    write_policy_csv(extract_policy(system, field_, dt), out / "policy.csv")
    extra = {"instance": system.name, "dx": cfg.dx, "dt": dt, "tol": cfg.tol, "meta": {**_meta(), "wall_time": report.wall_time}}
    if inst.initial is not None:
        x0, q0 = inst.initial
        extra["value_at_initial"] = {"x": x0.tolist(), "mode": q0, "value": field_(x0, q0)}
    write_report_json(report, consts, out / "report.json", extra)
    status = "converged" if report.converged else "NOT converged"
    print(f"{status} after {report.iterations} iterations, residual {report.residual:.3g}; wrote {out}")
    return EXIT_OK if report.converged else EXIT_FAIL


def cmd_verify(cfg: RunConfig, inst: Instance) -> int:
    """Run the numerical checks and write one JSON report."""
    system = inst.system
    consts = estimate_constants(system, require_transversality=False)
    dt = cfg.solver_dt(consts.F)
    grid = Grid.build(system, cfg.dx)
    field_, solve_report = solve_qvi(system, grid, dt, tol=cfg.tol, max_iter=cfg.max_iter)
    checks: dict = {}
    suite = bound_suite(system, samples=cfg.samples, seed=cfg.seed, consts=consts)
    checks["bounds"] = suite.to_dict(include_records=cfg.extra.get("records", False))
    vb = check_value_bound(system, field_, consts)
    checks["value_bound"] = vb.to_dict()
    uq = check_uniqueness(system, grid, dt, tol=cfg.tol, max_iter=cfg.max_iter)
    checks["uniqueness"] = uq.to_dict()
    op = operator_properties(system, grid, dt, pairs=100, seed=cfg.seed)
    checks["operator"] = op.to_dict()
    dpp = dpp_sample(system, field_, dt, n=cfg.extra.get("dpp_samples", 100), seed=cfg.seed, threads=cfg.threads)
    res = np.array([d.residual for d in dpp])
    checks["dpp"] = {"samples": len(res), "mean": float(res.mean()), "max": float(res.max()),
                     "threshold": 3 * cfg.dx, "verdict": "pass" if res.max() <= 3 * cfg.dx else FAIL}
    q = system.target_mode
    holder = estimate_holder(system, field_, q, system.modes[q].domain, seed=cfg.seed)
    checks["holder"] = holder.to_dict()

    failed = []
    if not suite.passed:
        failed.append("bounds")
    for name in ("value_bound", "uniqueness", "dpp", "holder"):
        if checks[name]["verdict"] == FAIL:
            failed.append(name)
    if op.contraction_violations or op.monotonicity_violations:
        failed.append("operator")
    payload = {
        "instance": system.name,
        "seed": cfg.seed,
        "config": cfg.to_dict() | {"dt": dt},
        "constants": {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in consts.to_dict().items()},
        "solve": solve_report.to_dict(),
        "checks": checks,
        "hard_failures": failed,
        "passed": not failed,
        "meta": {**_meta(), "wall_time": solve_report.wall_time},
    }
    _write_json(payload, cfg.out, "verify.json")
    print(("all checks passed" if not failed else "FAILED: " + ", ".join(failed)), file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_export(cfg: RunConfig, inst: Instance) -> int:
    """Write grid nodes with class and signed distances, one CSV per mode."""
    system = inst.system
    grid = Grid.build(system, cfg.dx)
    out = Path(cfg.out or "export")
    out.mkdir(parents=True, exist_ok=True)
    for q, g in enumerate(grid.modes):
        sd = {k: np.broadcast_to(system.sdf(k, q, g.points), (g.size,)) for k in ("A", "C", "D", "Gamma")}
        with open(out / f"grid_mode{q}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(g.dim)] + ["class", "in_D", "sd_A", "sd_C", "sd_D", "sd_Gamma"])
            for k, x in enumerate(g.points):
                w.writerow([repr(float(c)) for c in x] + [CLASS_NAMES[int(g.classes[k])], int(g.in_D[k])]
                           + ["" if not math.isfinite(sd[n][k]) else repr(float(sd[n][k])) for n in ("A", "C", "D", "Gamma")])
    (out / "instance.json").write_text(json.dumps(inst.raw, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(grid.modes)} grid file(s) to {out}")
    return EXIT_OK


HANDLERS = {"validate": cmd_validate, "simulate": cmd_simulate, "solve": cmd_solve, "verify": cmd_verify, "export": cmd_export}


# --------------------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", required=True, help="instance JSON file or bundled instance name")
    common.add_argument("--dx", type=float, default=0.01, help="grid spacing")
    common.add_argument("--dt", type=float, default=None, help="solver time step (default min(dx/2, dx/F))")
    common.add_argument("--sim-dt", type=float, default=0.01, help="integration step for simulate")
    common.add_argument("--tol", type=float, default=1e-8, help="value-iteration stopping tolerance")
    common.add_argument("--tmax", type=float, default=20.0, help="simulation horizon")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1, help="worker threads for sampled checks")
    common.add_argument("--max-iter", type=int, default=200_000)
    common.add_argument("--samples", type=int, default=1000, help="samples per bound check (verify)")
    common.add_argument("--strict", action="store_true", help="exit 3 when an assumption check fails")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hybridreach", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HANDLERS[name].__doc__.splitlines()[0])
    return parser


def run(cfg: RunConfig) -> int:
    inst = _load(cfg.instance)
    if cfg.strict and cfg.command != "validate":
        report = validate_assumptions(inst.system, seed=cfg.seed)
        if not report.passed:
            for c in report.failures():
                print(f"{c.name}: failed (witness {c.witness:.6g}) {c.detail}", file=sys.stderr)
            return EXIT_ASSUMPTION
    return HANDLERS[cfg.command](cfg, inst)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig(
            command=args.command, instance=args.instance, dx=args.dx, dt=args.dt, tol=args.tol, tmax=args.tmax,
            sim_dt=args.sim_dt, seed=args.seed, threads=args.threads, max_iter=args.max_iter, samples=args.samples,
            strict=args.strict, out=args.out,
        )
        return run(cfg)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ConfigurationError, InputError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except HybridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
