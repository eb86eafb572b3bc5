"""Command-line entry point: ``pmclab <subcommand> ...``.

Exit codes: 0 asserted checks pass, 1 an asserted check failed, 2 diagnostic run
(a hypothesis does not hold), 3 solver failure, 4 config or input error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import experiment as ex
from .config import ExperimentConfig, load_config
from .errors import ConfigError, MeshError, PmcLabError
from .mesh import read_mesh, write_mesh

OUTPUT_DIR_ENV = "PMCLAB_OUTPUT_DIR"

log = logging.getLogger("pmclab")


def resolve_output(path: str, cfg: ExperimentConfig | None = None) -> Path:
    """Relative outputs land in ``$PMCLAB_OUTPUT_DIR``, else the config's ``output_dir``, else the cwd."""
    p = Path(path)
    if p.is_absolute():
        return p
    root = os.environ.get(OUTPUT_DIR_ENV) or (cfg.output_dir if cfg else None)
    if root:
        p = Path(root) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _mesh_for(cfg: ExperimentConfig, mesh_path: str | None):
    if cfg.backend != "fem":
        raise ConfigError("this subcommand needs a config with a domain")
    if mesh_path:
        return read_mesh(mesh_path, domain=cfg.domain2d())
    return ex.build_mesh(cfg)


def cmd_mesh(args) -> int:
    cfg = load_config(args.config)
    mesh = _mesh_for(cfg, None)
    out = resolve_output(args.out, cfg)
    write_mesh(mesh, out)
    log.info("wrote %d vertices, %d triangles to %s", mesh.n_vertices, mesh.n_triangles, out)
    return ex.EXIT_OK


def cmd_solve_radial(args) -> int:
    cfg = load_config(args.config)
    if cfg.backend != "radial":
        raise ConfigError("solve-radial needs a config with metric and R")
    try:
        sol = ex.solve(cfg)
    except PmcLabError as exc:
        log.error("solver failure: %s", exc)
        return ex.EXIT_SOLVER
    resolve_output(args.out, cfg).write_text(ex.radial_solution_csv(sol))
    return ex.EXIT_OK


def cmd_solve_fem(args) -> int:
    cfg = load_config(args.config)
    mesh = _mesh_for(cfg, args.mesh)
    try:
        sol = ex.solve(cfg, mesh)
    except PmcLabError as exc:
        log.error("solver failure: %s", exc)
        return ex.EXIT_SOLVER
    resolve_output(args.out, cfg).write_text(ex.fem_solution_csv(sol))
    return ex.EXIT_OK


def _emit_report(rep: ex.VerdictReport, out: str | None, cfg) -> int:
    text = rep.to_json() + "\n"
    if out:
        resolve_output(out, cfg).write_text(text)
    else:
        sys.stdout.write(text)
    return rep.exit_code


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    mesh = _mesh_for(cfg, args.mesh) if cfg.backend == "fem" else None
    try:
        text = Path(args.solution).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read solution {args.solution}: {exc}") from None
    sol = ex.read_solution_csv(text, cfg, mesh)
    try:
        rep = ex.analyze(cfg, sol)
    except PmcLabError as exc:
        rep = ex.VerdictReport(cfg.id, cfg.hash, cfg.backend, "n/a", cfg.dimension,
                               status=f"analysis failure: {exc}", exit_code=ex.EXIT_SOLVER)
    return _emit_report(rep, args.out, cfg)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    return _emit_report(ex.run_experiment(cfg), args.out, cfg)


def _parse_values(raw: str) -> list[float]:
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"sweep values must be comma-separated numbers, got {raw!r}") from None


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    values = _parse_values(args.values)
    if args.parameter == "level":
        values = [int(v) for v in values]
    rows = ex.sweep(cfg, args.parameter, values, jobs=args.jobs)
    text = ex.sweep_csv(args.parameter, rows)
    if args.out:
        resolve_output(args.out, cfg).write_text(text)
    else:
        sys.stdout.write(text)
    codes = [rep.exit_code for _, rep in rows]
    return max(codes) if codes else ex.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pmclab", description="Numerical laboratory for the prescribed mean curvature overdetermined problem.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("mesh", help="write the polar mesh described by a config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mesh)

    s = sub.add_parser("solve-radial", help="solve the radial problem, write rho,u,uprime,w,theta,P")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve_radial)

    s = sub.add_parser("solve-fem", help="solve on a mesh, write vertex and boundary sections")
    s.add_argument("--config", required=True)
    s.add_argument("--mesh", help="mesh file; built from the config when omitted")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve_fem)

    s = sub.add_parser("verify", help="evaluate every check on a stored solution, write the report JSON")
    s.add_argument("--solution", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--mesh", help="mesh the FEM solution was computed on")
    s.add_argument("--out", help="report path; stdout when omitted")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("run", help="solve and verify in one step")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="report path; stdout when omitted")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="one report row per parameter value, as CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--parameter", required=True, help="R, level, h0 or warp:<k>")
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--jobs", type=int, default=1, help="worker threads; row order is unaffected")
    s.add_argument("--out", help="CSV path; stdout when omitted")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, MeshError) as exc:
        log.error("%s", exc)
        return ex.EXIT_CONFIG
    except PmcLabError as exc:
        log.error("%s", exc)
        return ex.EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
