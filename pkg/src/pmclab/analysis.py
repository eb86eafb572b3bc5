"""Integral identities, inequalities and P-function diagnostics.

Every function accepts either a :class:`~pmclab.radial.RadialSolution` (geodesic
balls, exact radial quadrature) or a :class:`~pmclab.fem.FemSolution` (flat
planar domains). Boundary quantities come from a
:class:`~pmclab.geometry.BoundaryTrace` carrying the flux ``q = u_nu/w``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HypothesisViolated
from .fem import FemSolution, recover_boundary_flux, stiffness
from .geometry import BoundaryTrace
from .metric import ConformalField, MetricSpec
from .nonlinearity import Nonlinearity
from .radial import RadialSolution, radial_quadrature

RADIAL_TOL = 1e-8


def radial_trace(sol: RadialSolution) -> BoundaryTrace:
    """The boundary sphere as a single sample carrying its total area."""
    m = sol.metric
    area = radial_quadrature(sol, 1.0, over="boundary")
    return BoundaryTrace(
        theta=np.array([np.nan]),
        points=np.array([[sol.R, 0.0]]),
        normals=np.array([[1.0, 0.0]]),
        weights=np.array([area]),
        Htilde=np.array([-m.dh(sol.R) / m.h(sol.R)]),
        q=np.array([sol.flux[-1]]),
    )


def boundary_trace_of(sol) -> BoundaryTrace:
    if isinstance(sol, RadialSolution):
        return radial_trace(sol)
    return recover_boundary_flux(sol, check=False)


def domain_integral_f(sol) -> float:
    """``int_Omega f(u)``; on meshes the same rule as the weak residual."""
    if isinstance(sol, RadialSolution):
        return radial_quadrature(sol, sol.nl.f(sol.u))
    return sol.integral_f()


def domain_volume(sol) -> float:
    if isinstance(sol, RadialSolution):
        return radial_quadrature(sol, 1.0)
    return sol.mesh.area


# --------------------------------------------------------------------------- P-function


@dataclass(frozen=True, eq=False)
class PField:
    values: np.ndarray
    w: np.ndarray
    on_boundary: np.ndarray
    n: int
    tol: float
    boundary_constant: float | None = None

    @property
    def spread(self) -> float:
        return float(self.values.max() - self.values.min())

    @property
    def min_boundary(self) -> float:
        return float(self.values[self.on_boundary].min())

    @property
    def min_interior(self) -> float:
        return float(self.values[~self.on_boundary].min())

    @property
    def argmin_interior(self) -> int:
        idx = np.flatnonzero(~self.on_boundary)
        return int(idx[np.argmin(self.values[idx])])


def nodal_w(sol: FemSolution, trace: BoundaryTrace | None = None) -> np.ndarray:
    """Vertex ``w``: area-weighted mean of the element values.

    Boundary vertices take ``1/sqrt(1 - q^2)`` from the recovered flux instead,
    since the one-sided element average is biased there. Vertical points
    (``|q| >= 1``) get ``w = inf``.
    """
    m = sol.mesh
    A = np.repeat(m.areas, 3)
    t = m.triangles.ravel()
    w = np.bincount(t, A * np.repeat(sol.w, 3), minlength=m.n_vertices) / np.bincount(
        t, A, minlength=m.n_vertices
    )
    trace = trace or recover_boundary_flux(sol, check=False)
    q2 = np.minimum(trace.q**2, 1.0)
    with np.errstate(divide="ignore"):
        w[trace.extra["vertices"]] = 1.0 / np.sqrt(1.0 - q2)
    return w


def build_p_field(sol, nl: Nonlinearity | None = None, trace: BoundaryTrace | None = None) -> PField:
    """``P = n/w + F(u)`` at every node."""
    nl = nl or sol.nl
    if isinstance(sol, RadialSolution):
        on_b = np.zeros(sol.rho.size, dtype=bool)
        on_b[-1] = True
        w = sol.w
        return PField(
            values=sol.n / w + nl.F(sol.u),
            w=w,
            on_boundary=on_b,
            n=sol.n,
            tol=RADIAL_TOL,
            boundary_constant=sol.n / np.sqrt(1.0 + sol.c**2),
        )
    w = nodal_w(sol, trace)
    return PField(
        values=sol.n / w + nl.F(sol.u),
        w=w,
        on_boundary=sol.mesh.is_boundary,
        n=sol.n,
        tol=sol.mesh.h,  # O(h): the nodal w reconstruction is first order on polar meshes
    )


@dataclass(frozen=True)
class SuperharmonicCheck:
    s: np.ndarray
    violation: float

    @property
    def fraction_nonnegative(self) -> float:
        return float(np.mean(self.s >= 0.0)) if self.s.size else 1.0


def check_superharmonic(p: PField, sol: FemSolution) -> SuperharmonicCheck:
    """Weak Laplacian pairings ``s_i = int <DP, D lambda_i>`` at interior vertices.

    ``-Delta P >= 0`` corresponds to ``s_i >= 0``; the violation is
    ``max(0, -min s) / max |s|`` (zero when every ``s_i`` vanishes).
    """
    # shifting by a constant is exact in the continuum and keeps constant P at s = 0 bitwise
    s = (stiffness(sol.mesh) @ (p.values - p.values[0]))[~sol.mesh.is_boundary]
    scale = float(np.max(np.abs(s))) if s.size else 0.0
    if scale == 0.0:
        return SuperharmonicCheck(s, 0.0)
    return SuperharmonicCheck(s, max(0.0, -float(s.min())) / scale)


@dataclass(frozen=True)
class MinPrincipleVerdict:
    branch: str  # "constant", "boundary-min" or "violated"
    spread: float
    min_boundary: float
    min_interior: float
    tol: float

    @property
    def holds(self) -> bool:
        return self.branch != "violated"


def check_min_principle(p: PField, tol: float | None = None) -> MinPrincipleVerdict:
    tol = p.tol if tol is None else tol
    mb, mi = p.min_boundary, p.min_interior
    if p.spread <= tol:
        branch = "constant"
    elif mb <= mi + tol:
        branch = "boundary-min"
    else:
        branch = "violated"
    return MinPrincipleVerdict(branch, p.spread, mb, mi, tol)


# --------------------------------------------------------------------------- boundary identities


def prop2_boundary_quantity(trace: BoundaryTrace, f0: float, n: int) -> np.ndarray:
    """``u_nu (f(0) + n Htilde u_nu / w)`` per boundary sample."""
    q = trace.q
    with np.errstate(invalid="ignore", divide="ignore"):
        return trace.u_nu * (f0 + n * trace.Htilde * q)


def compatibility_residual(sol, trace: BoundaryTrace, nl: Nonlinearity | None = None) -> float:
    """``int_{dOmega} u_nu/w - int_Omega f(u)``."""
    return trace.integrate(trace.q) - domain_integral_f(sol)


@dataclass(frozen=True)
class HKResult:
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def hk_functional(sol, trace: BoundaryTrace, nl: Nonlinearity | None = None) -> HKResult:
    """``f(0)^2 int 1/Htilde`` against ``-n f(0) int f(u)``; margin ``rhs - lhs``."""
    nl = nl or sol.nl
    if np.any(trace.Htilde >= 0.0):
        raise HypothesisViolated("Htilde < 0", "boundary mean curvature is not negative everywhere")
    f0 = nl.f0
    lhs = f0**2 * trace.integrate(1.0 / trace.Htilde)
    rhs = -sol.n * f0 * domain_integral_f(sol)
    return HKResult(lhs, rhs)


WINDOWS = ("proof", "statement")


@dataclass(frozen=True)
class SoapResult:
    deficit: float
    h0: float
    window: str
    window_ok_proof: bool
    window_ok_statement: bool
    f0_is_n: bool

    @property
    def window_ok(self) -> bool:
        return self.window_ok_proof if self.window == "proof" else self.window_ok_statement


def soap_deficit(sol, trace: BoundaryTrace, nl: Nonlinearity | None = None, h0="auto",
                 window: str = "proof", rtol: float = 1e-12) -> SoapResult:
    """``int (Htilde - H0) (u_nu/w)^2`` plus both admissibility windows for ``H0``.

    ``window="proof"`` requires ``1/H0 >= -int f / |dOmega|``; ``"statement"``
    requires ``-int f_+ / |dOmega| <= H0 < 0``. ``h0="auto"`` picks the extremal
    value of the proof window, ``-|dOmega| / int f``.
    """
    nl = nl or sol.nl
    if window not in WINDOWS:
        raise ValueError(f"window must be one of {WINDOWS}")
    L = trace.length
    int_f = domain_integral_f(sol)
    if h0 == "auto":
        if int_f <= 0:
            raise HypothesisViolated("int f(u) > 0", "auto H0 needs a positive bulk integral of f")
        h0 = -L / int_f
    h0 = float(h0)
    if h0 >= 0:
        raise ValueError("H0 must be negative")
    if isinstance(sol, RadialSolution):
        int_fplus = radial_quadrature(sol, nl.f_plus(sol.u))
    else:
        ubar = sol.u[sol.mesh.triangles].mean(axis=1)
        int_fplus = sol.integrate_elementwise(nl.f_plus(ubar))
    slack = rtol * max(1.0, abs(int_f / L), abs(1.0 / h0))
    ok_proof = 1.0 / h0 >= -int_f / L - slack
    ok_statement = -int_fplus / L - slack <= h0 < 0
    deficit = trace.integrate((trace.Htilde - h0) * trace.q**2)
    return SoapResult(deficit, h0, window, bool(ok_proof), bool(ok_statement), nl.f0 == sol.n)


# --------------------------------------------------------------------------- Pohozaev


def _radial_phi(sol: RadialSolution, cf: ConformalField):
    if cf.metric.h_coeffs != sol.metric.h_coeffs:
        raise ValueError("conformal field must live on the solution's metric")
    return cf.phi(sol.rho)


def _log_phi_term(sol: RadialSolution, cf: ConformalField):
    """``u <D ln phi, Du/w>``, radially ``u (h''/h') u'/w``."""
    return sol.u * (cf.metric.d2h(sol.rho) / cf.phi(sol.rho)) * sol.flux


def _require_flat(sol: FemSolution, cf: ConformalField):
    if not cf.metric.is_flat:
        raise ValueError("mesh solutions live in flat space; use the flat conformal field")


def _boundary_field_flux(sol: FemSolution, trace: BoundaryTrace, base) -> float:
    """``int_{dOmega} <x - base, nu>/w`` on the boundary polygon.

    The integrand is a product of two linear functions on each edge and is
    integrated exactly.
    """
    mesh = sol.mesh
    order = trace.extra["vertices"]
    pos = np.full(mesh.n_vertices, -1)
    pos[order] = np.arange(order.size)
    inv_w = np.sqrt(np.maximum(1.0 - trace.q**2, 0.0))
    nu, length = mesh.edge_normals()
    e = mesh.boundary_edges
    a = np.einsum("ek,ek->e", mesh.points[e[:, 0]] - base, nu)
    b = np.einsum("ek,ek->e", mesh.points[e[:, 1]] - base, nu)
    ga, gb = inv_w[pos[e[:, 0]]], inv_w[pos[e[:, 1]]]
    return float(np.sum(length / 6.0 * (2 * a * ga + a * gb + b * ga + 2 * b * gb)))


def pohozaev_residual(sol, cf: ConformalField | None = None, nl: Nonlinearity | None = None,
                      form: str = "specialized", trace: BoundaryTrace | None = None,
                      c: float | None = None) -> float:
    """Residual of the Pohozaev identity for the closed conformal field ``cf``.

    ``form="general"`` holds for any Dirichlet solution::

        n int F(u) phi + (n-1) int phi |Du|^2/w + n int phi/w - int <Upsilon, nu>/w

    ``form="specialized"`` assumes ``u_nu = c`` on the boundary::

        int P phi + (n-1) int (F - u f - u <D ln phi, Du/w>) phi - n/sqrt(1+c^2) int phi

    Radial solutions use ``c = u'(R)``; mesh solutions need ``c`` passed in.
    """
    nl = nl or sol.nl
    n = sol.n
    if form not in ("specialized", "general"):
        raise ValueError("form must be 'specialized' or 'general'")
    if isinstance(sol, RadialSolution):
        cf = cf or ConformalField(sol.metric)
        phi = _radial_phi(sol, cf)
        if np.any(phi <= 0):
            raise HypothesisViolated("phi > 0")
        u, w = sol.u, sol.w
        if form == "general":
            bulk = radial_quadrature(sol, n * nl.F(u) * phi + (n - 1) * phi * sol.uprime**2 / w + n * phi / w)
            # <Upsilon, nu> = h(R) on the geodesic sphere; translations in flat
            # space integrate to zero against the constant 1/w
            bdry = radial_quadrature(sol, cf.normal_component(sol.R) / w, over="boundary")
            return bulk - bdry
        P = n / w + nl.F(u)
        Phi = (nl.F(u) - u * nl.f(u) - _log_phi_term(sol, cf)) * phi
        cc = sol.c if c is None else c
        return radial_quadrature(sol, P * phi + (n - 1) * Phi) - n / np.sqrt(1 + cc**2) * radial_quadrature(sol, phi)

    cf = cf or ConformalField(MetricSpec.flat(2))
    _require_flat(sol, cf)
    base = np.asarray(cf.base, dtype=float)
    if form == "general":
        trace = trace or recover_boundary_flux(sol, check=False)
        bulk = (
            n * sol.integrate_nodal(lambda u, x: nl.F(u))
            + (n - 1) * sol.integrate_elementwise(np.sum(sol.grad**2, axis=1) / sol.w)
            + n * sol.integrate_elementwise(1.0 / sol.w)
        )
        return bulk - _boundary_field_flux(sol, trace, base)
    if c is None:
        raise HypothesisViolated("u_nu constant", "specialized identity needs a declared constant c")
    intP = n * sol.integrate_elementwise(1.0 / sol.w) + sol.integrate_nodal(lambda u, x: nl.F(u))
    Phi = sol.integrate_nodal(lambda u, x: nl.F(u) - u * nl.f(u))
    return intP + (n - 1) * Phi - n / np.sqrt(1 + c**2) * sol.mesh.area


def rigidity_hypothesis_integral(sol, cf: ConformalField | None = None, nl: Nonlinearity | None = None) -> float:
    """``int (F(u) - u f(u) - u <D ln phi, Du/w>) phi``; nonnegative is the rigidity hypothesis."""
    nl = nl or sol.nl
    if isinstance(sol, RadialSolution):
        cf = cf or ConformalField(sol.metric)
        phi = _radial_phi(sol, cf)
        if np.any(phi <= 0):
            raise HypothesisViolated("phi > 0")
        return radial_quadrature(sol, (nl.F(sol.u) - sol.u * nl.f(sol.u) - _log_phi_term(sol, cf)) * phi)
    cf = cf or ConformalField(MetricSpec.flat(2))
    _require_flat(sol, cf)
    return sol.integrate_nodal(lambda u, x: nl.F(u) - u * nl.f(u))


def flux_spread(trace: BoundaryTrace) -> float:
    return float(trace.q.max() - trace.q.min())
