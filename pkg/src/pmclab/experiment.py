"""Config-driven runs: solve, evaluate every identity, and tabulate verdicts."""
from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import analysis as an
from .config import ExperimentConfig
from .errors import ConfigError, HypothesisViolated, PmcLabError, SolverError
from .fem import FemSolution, P1Geometry, gradients, solve_fem
from .mesh import Mesh, mesh_polar, refine
from .metric import ConformalField, MetricSpec, check_ricci_sign
from .chebyshev import lobatto_grid
from .radial import RadialSolution, cap_oracle, ode_residual, solve_radial

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_HYPOTHESIS = 2
EXIT_SOLVER = 3
EXIT_CONFIG = 4

# Asserted tolerances for ball runs.
TOL_HK_REL = 1e-7
TOL_PROP2 = 1e-9
TOL_SOAP = 1e-8
TOL_POHOZAEV = 1e-6
TOL_COMPAT_FEM = 1e-10
TOL_COMPAT_RADIAL = 1e-7
TOL_FLUX_CONSTANT = 1e-6


def na(hypothesis: str) -> str:
    return f"n/a: {hypothesis}"


@dataclass
class VerdictReport:
    experiment_id: str
    config_hash: str
    backend: str
    resolution: str
    n: int
    f_prime_nonneg: bool | str = na("not evaluated")
    f0_nonzero: bool | str = na("not evaluated")
    htilde_negative: bool | str = na("not evaluated")
    ricci_nonneg: bool | str = na("not evaluated")
    phi_positive: bool | str = na("not evaluated")
    u_nu_constant: bool | str = na("not evaluated")
    stiff_boundary: bool | str = na("not evaluated")
    c: float | str = na("not evaluated")
    hk_lhs: float | str = na("not evaluated")
    hk_rhs: float | str = na("not evaluated")
    hk_margin: float | str = na("not evaluated")
    soap_deficit: float | str = na("not evaluated")
    h0_used: float | str = na("not evaluated")
    h0_window_variant: str = "proof"
    h0_window_ok_proof: bool | str = na("not evaluated")
    h0_window_ok_statement: bool | str = na("not evaluated")
    pohozaev_residual: float | str = na("not evaluated")
    pohozaev_residual_general: float | str = na("not evaluated")
    rigidity_integral: float | str = na("not evaluated")
    rigidity_hypothesis_holds: bool | str = na("not evaluated")
    compat_residual: float | str = na("not evaluated")
    p_min_interior: float | str = na("not evaluated")
    p_min_boundary: float | str = na("not evaluated")
    p_spread: float | str = na("not evaluated")
    p_boundary_constant: float | str = na("not evaluated")
    min_principle_branch: str = na("not evaluated")
    superharmonicity_violation: float | str = na("not evaluated")
    prop2_min: float | str = na("not evaluated")
    prop2_max: float | str = na("not evaluated")
    flux_spread: float | str = na("not evaluated")
    oracle_error: float | str = na("not evaluated")
    observed_order: float | str = na("single run")
    solver_residual: float | str = na("not evaluated")
    diagnostic_only: bool = False
    status: str = "ok"
    exit_code: int = EXIT_OK
    failed_checks: list = field(default_factory=list)
    prop2_quantity: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, allow_nan=True)


# CSV column order is part of the interface.
CSV_COLUMNS = [f.name for f in fields(VerdictReport) if f.name not in ("failed_checks", "prop2_quantity")]
SWEEP_COLUMNS = ["sweep_parameter", "sweep_value"] + CSV_COLUMNS


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


# --------------------------------------------------------------------------- solving


def build_mesh(cfg: ExperimentConfig) -> Mesh:
    m = mesh_polar(cfg.domain2d(), cfg.solver.nr, cfg.solver.ntheta)
    for _ in range(cfg.levels - 1):
        m = refine(m)
    return m


def solve(cfg: ExperimentConfig, mesh: Mesh | None = None):
    nl = cfg.nonlinearity()
    if cfg.backend == "radial":
        return solve_radial(cfg.metric_spec(), nl, cfg.R, tol=cfg.solver.tol, m=cfg.solver.nodes)
    return solve_fem(mesh or build_mesh(cfg), nl, cfg.fem_options())


def fem_solution_from_nodal(mesh: Mesh, u: np.ndarray, cfg: ExperimentConfig) -> FemSolution:
    Du = gradients(mesh, P1Geometry.of(mesh), u)
    return FemSolution(mesh, np.asarray(u, float), cfg.nonlinearity(), Du, np.sqrt(1 + np.sum(Du**2, axis=1)),
                       options=cfg.fem_options())


def _resolution(sol) -> str:
    if isinstance(sol, RadialSolution):
        return f"chebyshev m={sol.m}"
    m = sol.mesh
    return f"mesh V={m.n_vertices} T={m.n_triangles} h={m.h:.6g}"


def _cap_error(cfg: ExperimentConfig, sol):
    """Max nodal error against the spherical cap, when one exists."""
    nl = cfg.nonlinearity()
    if not nl.is_constant:
        return na("no closed-form oracle (f not constant)")
    if cfg.backend == "radial":
        if not cfg.metric_spec().is_flat:
            return na("no closed-form oracle (warped metric)")
        R, n = cfg.R, cfg.metric_spec().n
    else:
        d = cfg.domain2d()
        if d.kind != "disk":
            return na("no closed-form oracle (not a disk)")
        R, n = d.params[0], 2
    f0 = nl.f0
    if f0 != 0 and R >= n / abs(f0):
        return na("cap infeasible")
    if isinstance(sol, RadialSolution):
        return float(np.max(np.abs(sol.u - cap_oracle(n, R, f0, sol.m).u)))
    if f0 == 0:
        return float(np.max(np.abs(sol.u)))
    r0 = n / abs(f0)
    rho2 = np.sum(sol.mesh.points**2, axis=1)
    exact = np.sign(f0) * (np.sqrt(r0**2 - R**2) - np.sqrt(np.maximum(r0**2 - rho2, 0.0)))
    return float(np.max(np.abs(sol.u - exact)))


# --------------------------------------------------------------------------- analysis


def analyze(cfg: ExperimentConfig, sol) -> VerdictReport:
    nl = cfg.nonlinearity()
    radial = isinstance(sol, RadialSolution)
    n = sol.n
    rep = VerdictReport(cfg.id, cfg.hash, cfg.backend, _resolution(sol), n, h0_window_variant=cfg.h0_window)
    checks = set(cfg.checks)
    failed = []

    metric = sol.metric if radial else MetricSpec.flat(2)
    if radial:
        cf = ConformalField(metric)
        R = sol.R
    else:
        cf = ConformalField(metric, base=cfg.pohozaev_base)
        R = None
    trace = an.boundary_trace_of(sol)

    rep.f_prime_nonneg = nl.is_monotone_on(sol.u)
    rep.f0_nonzero = nl.f0 != 0.0
    rep.htilde_negative = bool(np.all(trace.Htilde < 0))
    rep.ricci_nonneg = check_ricci_sign(metric, R) if radial else True
    rep.phi_positive = cf.check_positive(R) if radial else True
    rep.stiff_boundary = bool(np.any(np.abs(trace.q) >= 1.0))
    u_nu = trace.u_nu
    rep.flux_spread = an.flux_spread(trace)
    if radial:
        rep.u_nu_constant = True
        rep.c = sol.c
    else:
        finite = np.all(np.isfinite(u_nu))
        rep.u_nu_constant = bool(finite and np.ptp(u_nu) <= TOL_FLUX_CONSTANT * max(1.0, np.abs(u_nu).max()))
        rep.c = float(trace.integrate(u_nu) / trace.length) if finite else na("|q| < 1")
    ball = radial or cfg.domain2d().kind == "disk"
    rep.diagnostic_only = not ball
    rep.solver_residual = sol.ode_residual if radial else (sol.iterations[-1]["decrement"] if sol.iterations else 0.0)
    rep.oracle_error = _cap_error(cfg, sol)

    def missing(*names):
        labels = {
            "f_prime_nonneg": "f' >= 0",
            "f0_nonzero": "f(0) != 0",
            "htilde_negative": "Htilde < 0",
            "ricci_nonneg": "Ric >= 0",
            "phi_positive": "phi > 0",
            "stiff_boundary": "|q| < 1",
        }
        for name in names:
            val = getattr(rep, name)
            bad = val if name == "stiff_boundary" else not val
            if bad:
                return na(labels[name])
        return None

    base_hyp = ("ricci_nonneg", "f_prime_nonneg", "f0_nonzero")

    if "compat" in checks:
        rep.compat_residual = an.compatibility_residual(sol, trace, nl)
        tol = TOL_COMPAT_RADIAL if radial else TOL_COMPAT_FEM
        if not abs(rep.compat_residual) <= tol:
            failed.append("compat")

    if checks & {"p_function", "min_principle", "superharmonic"}:
        p = an.build_p_field(sol, nl, trace=None if radial else trace)
        rep.p_min_interior = p.min_interior
        rep.p_min_boundary = p.min_boundary
        rep.p_spread = p.spread
        rep.p_boundary_constant = p.boundary_constant if radial else (
            n / np.sqrt(1 + rep.c**2) if isinstance(rep.c, float) and (rep.u_nu_constant or ball) else na("u_nu constant"))
        skip = missing(*base_hyp)
        if "min_principle" in checks:
            verdict = an.check_min_principle(p)
            rep.min_principle_branch = skip or verdict.branch
            if not skip and ball and not verdict.holds:
                failed.append("min_principle")
        if "superharmonic" in checks:
            if radial:
                rep.superharmonicity_violation = na("mesh solution")
            else:
                rep.superharmonicity_violation = skip or an.check_superharmonic(p, sol).violation

    if "prop2" in checks:
        skip = missing(*base_hyp, "stiff_boundary")
        vals = an.prop2_boundary_quantity(trace, nl.f0, n)
        rep.prop2_quantity = [float(v) for v in vals]
        if skip:
            rep.prop2_min = rep.prop2_max = skip
        else:
            rep.prop2_min, rep.prop2_max = float(np.min(vals)), float(np.max(vals))
            scale = max(1.0, float(np.max(np.abs(vals))))
            if ball and radial and rep.prop2_min < -TOL_PROP2 * scale:
                failed.append("prop2")

    if "hk" in checks:
        skip = missing(*base_hyp, "htilde_negative", "stiff_boundary")
        if skip:
            rep.hk_lhs = rep.hk_rhs = rep.hk_margin = skip
        else:
            hk = an.hk_functional(sol, trace, nl)
            rep.hk_lhs, rep.hk_rhs, rep.hk_margin = hk.lhs, hk.rhs, hk.margin
            if radial and hk.margin < -TOL_HK_REL * abs(hk.rhs):
                failed.append("hk")

    if "soap" in checks:
        skip = missing("ricci_nonneg", "f_prime_nonneg", "stiff_boundary")
        if not skip and nl.f0 != n:
            skip = na("f(0) = n")
        try:
            sd = an.soap_deficit(sol, trace, nl, h0=cfg.h0, window=cfg.h0_window)
            rep.h0_used = sd.h0
            rep.h0_window_ok_proof = sd.window_ok_proof
            rep.h0_window_ok_statement = sd.window_ok_statement
            rep.soap_deficit = skip or sd.deficit
            if not skip and radial and sd.window_ok and sd.deficit < -TOL_SOAP:
                failed.append("soap")
        except HypothesisViolated as exc:
            rep.soap_deficit = rep.h0_used = na(exc.hypothesis)

    if "pohozaev" in checks:
        rep.pohozaev_residual_general = an.pohozaev_residual(sol, cf, nl, form="general", trace=trace)
        if radial:
            rep.pohozaev_residual = an.pohozaev_residual(sol, cf, nl, form="specialized")
        elif rep.u_nu_constant is True or ball:
            rep.pohozaev_residual = an.pohozaev_residual(sol, cf, nl, form="specialized", c=rep.c)
        else:
            rep.pohozaev_residual = na("u_nu constant")
        if radial and not abs(rep.pohozaev_residual_general) <= TOL_POHOZAEV:
            failed.append("pohozaev")

    if "rigidity" in checks:
        rep.rigidity_integral = missing("phi_positive") or an.rigidity_hypothesis_integral(sol, cf, nl)
        if isinstance(rep.rigidity_integral, float):
            rep.rigidity_hypothesis_holds = rep.rigidity_integral >= -TOL_PROP2
        else:
            rep.rigidity_hypothesis_holds = rep.rigidity_integral

    hyp_ok = all(v is True for v in (rep.f_prime_nonneg, rep.f0_nonzero, rep.htilde_negative,
                                      rep.ricci_nonneg, rep.phi_positive)) and rep.stiff_boundary is False
    rep.failed_checks = failed
    if failed:
        rep.status, rep.exit_code = "checks failed: " + ",".join(failed), EXIT_CHECK_FAILED
    elif not hyp_ok or rep.diagnostic_only:
        rep.status, rep.exit_code = "diagnostic", EXIT_HYPOTHESIS
    return rep


def run_experiment(cfg: ExperimentConfig, mesh: Mesh | None = None) -> VerdictReport:
    """Solve and analyze; solver and analysis errors become a partial report."""
    try:
        sol = solve(cfg, mesh)
    except (SolverError, PmcLabError) as exc:
        if isinstance(exc, ConfigError):
            raise
        log.error("solver failure: %s", exc)
        return VerdictReport(cfg.id, cfg.hash, cfg.backend, "n/a", cfg.dimension,
                             status=f"solver failure: {type(exc).__name__}: {exc}", exit_code=EXIT_SOLVER)
    try:
        return analyze(cfg, sol)
    except PmcLabError as exc:
        return VerdictReport(cfg.id, cfg.hash, cfg.backend, _resolution(sol), sol.n,
                             status=f"analysis failure: {type(exc).__name__}: {exc}", exit_code=EXIT_SOLVER)


# --------------------------------------------------------------------------- sweeps

SWEEP_PARAMETERS = ("R", "level", "h0", "warp")


def _apply(cfg: ExperimentConfig, parameter: str, value) -> ExperimentConfig:
    if parameter == "R":
        if cfg.backend == "radial":
            return cfg.with_updates(R=float(value))
        if cfg.domain.kind != "disk":
            raise ConfigError("R sweeps on meshes need a disk domain")
        return cfg.with_updates(**{"domain.R": float(value)})
    if parameter == "level":
        return cfg.with_updates(levels=int(value))
    if parameter == "h0":
        return cfg.with_updates(h0=float(value))
    if parameter.startswith("warp:"):
        k = int(parameter.split(":", 1)[1])
        if cfg.backend != "radial":
            raise ConfigError("warp sweeps need a radial config")
        coeffs = list(cfg.metric_spec().h_coeffs)
        coeffs += [0.0] * (k + 1 - len(coeffs))
        coeffs[k] = float(value)
        return cfg.with_updates(**{"metric.warp": {"coeffs": coeffs}})
    raise ConfigError(f"unknown sweep parameter {parameter!r}; expected one of {SWEEP_PARAMETERS} (warp as 'warp:<k>')")


def sweep(cfg: ExperimentConfig, parameter: str, values, jobs: int = 1) -> list[tuple[object, VerdictReport]]:
    """One report per value, in input order; per-row failures do not stop the sweep."""
    values = list(values)
    cfgs = [_apply(cfg, parameter, v) for v in values]

    def one(c):
        try:
            return run_experiment(c)
        except PmcLabError as exc:
            return VerdictReport(c.id, c.hash, c.backend, "n/a", c.dimension,
                                 status=f"failure: {exc}", exit_code=EXIT_SOLVER)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(one, cfgs))
    else:
        reports = [one(c) for c in cfgs]
    if parameter == "level":
        prev = None
        for rep in reports:
            err = rep.oracle_error
            if isinstance(err, float) and isinstance(prev, float) and err > 0 and prev > 0:
                rep.observed_order = float(np.log2(prev / err))
            prev = err
    return list(zip(values, reports))


def sweep_csv(parameter: str, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SWEEP_COLUMNS)
    for value, rep in rows:
        d = asdict(rep)
        wr.writerow([parameter, _fmt(value)] + [_fmt(d[k]) for k in CSV_COLUMNS])
    return buf.getvalue()


def report_csv(reports) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_COLUMNS)
    for rep in reports:
        d = asdict(rep)
        wr.writerow([_fmt(d[k]) for k in CSV_COLUMNS])
    return buf.getvalue()


# --------------------------------------------------------------------------- solution files

RADIAL_COLUMNS = ["rho", "u", "uprime", "w", "theta", "P"]
FEM_VERTEX_COLUMNS = ["index", "x", "y", "u"]
FEM_BOUNDARY_COLUMNS = ["index", "q", "u_nu", "w", "Htilde"]


def radial_solution_csv(sol: RadialSolution) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(RADIAL_COLUMNS)
    for row in zip(sol.rho, sol.u, sol.uprime, sol.w, sol.theta, sol.P):
        wr.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def fem_solution_csv(sol: FemSolution) -> str:
    trace = an.boundary_trace_of(sol)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(FEM_VERTEX_COLUMNS)
    for i, ((x, y), u) in enumerate(zip(sol.mesh.points, sol.u)):
        wr.writerow([i, _fmt(x), _fmt(y), _fmt(u)])
    buf.write("\n")
    wr.writerow(FEM_BOUNDARY_COLUMNS)
    with np.errstate(invalid="ignore", divide="ignore"):
        cols = (trace.q, trace.u_nu, trace.w, trace.Htilde)
    for k, v in enumerate(trace.extra["vertices"]):
        wr.writerow([int(v)] + [_fmt(c[k]) for c in cols])
    return buf.getvalue()


def read_solution_csv(text: str, cfg: ExperimentConfig, mesh: Mesh | None = None):
    """Rebuild a solution from its CSV and the config that produced it."""
    lines = text.splitlines()
    if not lines:
        raise ConfigError("empty solution file")
    header = lines[0].split(",")
    if header == RADIAL_COLUMNS:
        if cfg.backend != "radial":
            raise ConfigError("radial solution file but mesh config")
        data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:] if ln.strip()])
        rho, u, up = data[:, 0], data[:, 1], data[:, 2]
        grid = lobatto_grid(cfg.R, rho.size - 1)
        if not np.allclose(rho, grid, rtol=0, atol=1e-14 * cfg.R):
            raise ConfigError("solution grid is not the Chebyshev-Lobatto grid for this R")
        sol = RadialSolution(grid, u, up, cfg.metric_spec(), cfg.nonlinearity(), float(cfg.R), alpha=float(u[0]))
        return RadialSolution(grid, u, up, sol.metric, sol.nl, sol.R, alpha=sol.alpha,
                              ode_residual=ode_residual(sol), boundary_residual=abs(float(u[-1])))
    if header == FEM_VERTEX_COLUMNS:
        if cfg.backend != "fem":
            raise ConfigError("mesh solution file but radial config")
        rows = []
        for ln in lines[1:]:
            if not ln.strip():
                break
            rows.append([float(x) for x in ln.split(",")])
        data = np.array(rows)
        mesh = mesh or build_mesh(cfg)
        if mesh.n_vertices != len(data) or not np.allclose(mesh.points, data[:, 1:3], rtol=0, atol=1e-12):
            raise ConfigError("solution vertices do not match the mesh built from the config")
        return fem_solution_from_nodal(mesh, data[:, 3], cfg)
    raise ConfigError(f"unrecognized solution header {lines[0]!r}")
