"""Radial reduction of the prescribed mean curvature problem on geodesic balls.

With ``s = u'/sqrt(1 + u'^2)`` (the radial flux) the equation becomes the
first-order system

    u' = s / sqrt(1 - s^2)
    s' = f(u) - (n - 1) (h'/h) s

with ``u(0) = alpha``, ``s(0) = 0``. The unknown ``alpha`` is found by shooting
on ``alpha -> u_alpha(R) = 0``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import sqrt

import numpy as np
from scipy.integrate import solve_ivp

from . import chebyshev as cheb
from .errors import BracketFailure, GeometryError, NonConvergence, StiffProfile
from .metric import MetricSpec
from .nonlinearity import Nonlinearity

log = logging.getLogger(__name__)

SLOPE_CAP = 1.0e6
SCAN_POINTS = 64
DEFAULT_NODES = 256
_S_CAP = SLOPE_CAP / sqrt(1.0 + SLOPE_CAP**2)


@dataclass(frozen=True, eq=False)
class RadialSolution:
    rho: np.ndarray
    u: np.ndarray
    uprime: np.ndarray
    metric: MetricSpec
    nl: Nonlinearity
    R: float
    alpha: float = 0.0
    ode_residual: float = 0.0
    boundary_residual: float = 0.0
    brackets: list = field(default_factory=list)
    scan: tuple = ()

    @property
    def n(self) -> int:
        return self.metric.n

    @property
    def w(self) -> np.ndarray:
        return np.sqrt(1.0 + self.uprime**2)

    @property
    def theta(self) -> np.ndarray:
        return 1.0 / self.w

    @property
    def flux(self) -> np.ndarray:
        """``u'/w``, the radial component of ``Du/w``."""
        return self.uprime / self.w

    @property
    def P(self) -> np.ndarray:
        return self.n / self.w + self.nl.F(self.u)

    @property
    def c(self) -> float:
        """Normal derivative ``u_nu`` on the boundary sphere."""
        return float(self.uprime[-1])

    @property
    def multiple(self) -> bool:
        return len(self.brackets) > 1

    @property
    def m(self) -> int:
        return self.rho.size - 1


def _rhs(nl, metric, with_sensitivity):
    n = metric.n

    def fun(rho, y):
        u, s = y[0], y[1]
        hh = (n - 1) * metric.dh(rho) / metric.h(rho)
        root = sqrt(max(1.0 - s * s, 1e-300))
        out = [s / root, nl.f(u) - hh * s]
        if with_sensitivity:
            U, S = y[2], y[3]
            out += [S / root**3, nl.f_prime(u) * U - hh * S]
        return out

    return fun


def _stiff_event(rho, y):
    return _S_CAP - abs(y[1])


_stiff_event.terminal = True


def _integrate(metric, nl, R, alpha, with_sensitivity=False, t_eval=None):
    """Integrate from a pole series at ``eps = 1e-6 R`` out to ``R``."""
    n = metric.n
    eps = 1e-6 * R
    fa, dfa = float(nl.f(alpha)), float(nl.f_prime(alpha))
    y0 = [alpha + fa * eps**2 / (2 * n), fa * eps / n]
    if with_sensitivity:
        y0 += [1.0 + dfa * eps**2 / (2 * n), dfa * eps / n]
    if t_eval is not None:
        t_eval = t_eval[t_eval >= eps]
    # Blow-up profiles overflow before the stiffness event stops them.
    with np.errstate(over="ignore", invalid="ignore"):
        return solve_ivp(
            _rhs(nl, metric, with_sensitivity),
            (eps, R),
            y0,
            method="DOP853",
            rtol=1e-13,
            atol=1e-15,
            events=_stiff_event,
            t_eval=t_eval,
        )


def _shoot(metric, nl, R, alpha, with_sensitivity=False):
    """Return ``(u_alpha(R), du/dalpha)``; stiff profiles map to +-inf."""
    sol = _integrate(metric, nl, R, alpha, with_sensitivity)
    if sol.status == 1 or not sol.success:
        s_end = sol.y[1, -1]
        return (np.inf if s_end > 0 else -np.inf), np.nan
    dg = sol.y[2, -1] if with_sensitivity else np.nan
    return float(sol.y[0, -1]), float(dg)


def _scan_window(nl, n):
    f0 = nl.f0
    if f0 > 0:
        return -2.0 * n / f0, 0.0
    if f0 < 0:
        return 0.0, 2.0 * n / abs(f0)
    return -2.0 * n, 2.0 * n


def _safeguarded_root(g, lo, hi, glo, ghi, tol, max_iter=200):
    """Newton iteration kept inside a shrinking sign-change bracket."""
    if glo > 0:
        lo, hi, glo, ghi = hi, lo, ghi, glo
    # now g(lo) < 0 < g(hi) (lo may exceed hi)
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        gx, dgx = g(x)
        if np.isfinite(gx) and abs(gx) <= tol:
            return x, gx
        if gx < 0:
            lo = x
        else:
            hi = x
        step_ok = False
        if np.isfinite(gx) and np.isfinite(dgx) and dgx != 0.0:
            xn = x - gx / dgx
            if min(lo, hi) < xn < max(lo, hi):
                x, step_ok = xn, True
        if not step_ok:
            x = 0.5 * (lo + hi)
        if abs(hi - lo) <= 4 * np.finfo(float).eps * max(1.0, abs(x)):
            break
    gx, _ = g(x)
    if np.isfinite(gx) and abs(gx) <= tol:
        return x, gx
    raise NonConvergence(f"shooting stalled at alpha={x:.17g}, u(R)={gx:.3e}")


def _ode_residual(rho, u, s, metric, nl, R):
    """Integrated-form residual of the first-order system on the grid."""
    hn = metric.h(rho) ** (metric.n - 1)
    up = s / np.sqrt(1.0 - s**2)
    r1 = hn * s - cheb.cumulative_integral(hn * nl.f(u), R)
    r2 = u - u[0] - cheb.cumulative_integral(up, R)
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))


def solve_radial(
    metric: MetricSpec,
    nl: Nonlinearity,
    R: float,
    tol: float = 1e-10,
    m: int = DEFAULT_NODES,
) -> RadialSolution:
    """Solve the radial Dirichlet problem on the geodesic ball of radius ``R``.

    The shooting parameter is ``alpha = u(0)``. A scan of ``SCAN_POINTS``
    values locates every sign change of ``alpha -> u_alpha(R)``; the bracket
    nearest ``alpha = 0`` is refined by safeguarded Newton iteration using
    the variational equation for the derivative.

    Raises
    ------
    BracketFailure
        no sign change in the scan window.
    StiffProfile
        the graph turns vertical (``|u'| > SLOPE_CAP``).
    NonConvergence
        the safeguarded iteration stalls above ``tol``.
    """
    if R <= 0 or tol <= 0:
        raise ValueError("R and tol must be positive")
    metric.check_admissible(R)
    n = metric.n
    rho = cheb.lobatto_grid(R, m)

    def g(alpha):
        return _shoot(metric, nl, R, alpha, with_sensitivity=True)

    brackets = []
    scan = ()
    g0, _ = _shoot(metric, nl, R, 0.0)
    if np.isfinite(g0) and abs(g0) <= tol:
        alpha, galpha = 0.0, g0
        brackets = [(0.0, 0.0)]
    else:
        a, b = _scan_window(nl, n)
        alphas = np.linspace(a, b, SCAN_POINTS)
        vals = np.array([_shoot(metric, nl, R, x)[0] for x in alphas])
        scan = (alphas, vals)
        for i in range(SCAN_POINTS - 1):
            if vals[i] == 0.0:
                brackets.append((alphas[i], alphas[i]))
            elif np.sign(vals[i]) * np.sign(vals[i + 1]) < 0:
                brackets.append((alphas[i], alphas[i + 1]))
        if vals[-1] == 0.0:
            brackets.append((alphas[-1], alphas[-1]))
        if not brackets:
            if np.any(~np.isfinite(vals)):
                raise StiffProfile("no admissible shooting bracket; profiles turn vertical")
            raise BracketFailure(f"u_alpha(R) has no sign change for alpha in [{a}, {b}]")
        brackets.sort(key=lambda br: min(abs(br[0]), abs(br[1])))
        if len(brackets) > 1:
            log.warning("shooting found %d brackets; solving the one nearest alpha=0", len(brackets))
        lo, hi = brackets[0]
        if lo == hi:
            alpha, galpha = lo, 0.0
        else:
            i = int(np.flatnonzero(alphas == lo)[0])
            alpha, galpha = _safeguarded_root(g, lo, hi, vals[i], vals[i + 1], tol)

    sol = _integrate(metric, nl, R, alpha, t_eval=rho)
    if sol.status == 1:
        raise StiffProfile(f"|u'| exceeded {SLOPE_CAP:g} before rho = R")
    if not sol.success:
        raise NonConvergence(sol.message)
    k = rho.size - sol.t.size
    u = np.empty_like(rho)
    s = np.empty_like(rho)
    # nodes inside the pole layer take the series values
    fa = float(nl.f(alpha))
    u[:k] = alpha + fa * rho[:k] ** 2 / (2 * n)
    s[:k] = fa * rho[:k] / n
    u[k:], s[k:] = sol.y[0], sol.y[1]
    uprime = s / np.sqrt(1.0 - s**2)
    resid = _ode_residual(rho, u, s, metric, nl, R)
    return RadialSolution(
        rho=rho,
        u=u,
        uprime=uprime,
        metric=metric,
        nl=nl,
        R=float(R),
        alpha=float(alpha),
        ode_residual=resid,
        boundary_residual=float(abs(u[-1])),
        brackets=brackets,
        scan=scan,
    )


def cap_oracle(n: int, R: float, f0: float, m: int = DEFAULT_NODES) -> RadialSolution:
    """Exact spherical-cap solution for the flat metric and constant ``f = f0``.

    The graph is a piece of a round sphere of radius ``n/|f0|``.
    """
    metric = MetricSpec.flat(n)
    nl = Nonlinearity.constant(f0)
    rho = cheb.lobatto_grid(R, m)
    if f0 == 0.0:
        z = np.zeros_like(rho)
        return RadialSolution(rho, z, z.copy(), metric, nl, float(R))
    r0 = n / abs(f0)
    if not 0.0 < R < r0:
        raise GeometryError(f"cap needs 0 < R < n/|f0| = {r0}, got R = {R}")
    sg = np.sign(f0)
    u = sg * (np.sqrt(r0**2 - R**2) - np.sqrt(r0**2 - rho**2))
    uprime = sg * rho / np.sqrt(r0**2 - rho**2)
    return RadialSolution(rho, u, uprime, metric, nl, float(R), alpha=float(u[0]))


def radial_quadrature(sol: RadialSolution, integrand, over: str = "domain") -> float:
    """Integrate a radial field over the ball (``over="domain"``) or its boundary sphere.

    ``integrand`` is an array of grid values, a scalar, or a callable of the solution.
    """
    g = integrand(sol) if callable(integrand) else integrand
    g = np.broadcast_to(np.asarray(g, dtype=float), sol.rho.shape)
    m = sol.metric
    if over == "boundary":
        return float(m.sphere_area * m.h(sol.R) ** (m.n - 1) * g[-1])
    if over != "domain":
        raise ValueError("over must be 'domain' or 'boundary'")
    wts = cheb.clenshaw_curtis_weights(sol.R, sol.m)
    return float(m.sphere_area * np.dot(wts, g * m.h(sol.rho) ** (m.n - 1)))


def ode_residual(sol: RadialSolution) -> float:
    return _ode_residual(sol.rho, sol.u, sol.flux, sol.metric, sol.nl, sol.R)
