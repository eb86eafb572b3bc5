import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmclab import radial
from pmclab.errors import BracketFailure, GeometryError, StiffProfile
from pmclab.metric import MetricSpec
from pmclab.nonlinearity import Nonlinearity
from pmclab.radial import cap_oracle, ode_residual, radial_quadrature, solve_radial

from conftest import WARP, cap_profile


def test_zero_rhs_gives_zero_solution():
    sol = solve_radial(MetricSpec.flat(2), Nonlinearity.constant(0.0), 0.5)
    assert np.all(sol.u == 0.0)
    assert sol.c == 0.0


def test_cap_reproduction(cap):
    assert np.max(np.abs(cap.u - cap_profile(cap.rho))) <= 1e-8
    assert cap.alpha == pytest.approx(-0.2, abs=1e-10)
    assert cap.c == pytest.approx(0.75, abs=1e-10)
    assert cap.ode_residual <= 1e-10
    assert cap.boundary_residual <= 1e-10


def test_warped_solution_residual(warped):
    assert warped.ode_residual <= 1e-8
    assert warped.boundary_residual <= 1e-10
    assert warped.c > 0


def test_warped_against_independent_integrator(warped):
    # Integrate the second-order form with scipy's Radau from the converged alpha
    from scipy.integrate import solve_ivp

    m, nl, n = WARP, Nonlinearity.affine(2, 1), 2
    eps = 1e-6 * 0.6

    def rhs(r, y):
        u, up = y
        w = np.sqrt(1 + up**2)
        # (h^{n-1} up/w)' = h^{n-1} f  ->  up' = w^3 (f - (n-1) h'/h up/w)
        return [up, w**3 * (nl.f(u) - (n - 1) * m.dh(r) / m.h(r) * up / w)]

    a = warped.alpha
    y0 = [a + nl.f(a) * eps**2 / (2 * n), nl.f(a) * eps / n]
    ref = solve_ivp(rhs, (eps, 0.6), y0, method="Radau", rtol=1e-12, atol=1e-14, t_eval=warped.rho[warped.rho >= eps])
    k = warped.rho.size - ref.t.size
    assert np.max(np.abs(ref.y[0] - warped.u[k:])) <= 1e-8


def test_derived_quantities(cap):
    assert np.all(cap.w >= 1.0)
    assert np.all((cap.theta > 0) & (cap.theta <= 1))
    assert np.max(np.abs(cap.P - 1.6)) <= 1e-8


@pytest.mark.parametrize("n", [2, 3, 5])
def test_higher_dimensional_caps(n):
    sol = solve_radial(MetricSpec.flat(n), Nonlinearity.constant(n), 0.7)
    assert np.max(np.abs(sol.u - cap_oracle(n, 0.7, n).u)) <= 1e-8


def test_negative_f0_mirrors_the_cap():
    sol = solve_radial(MetricSpec.flat(2), Nonlinearity.constant(-2.0), 0.6)
    assert sol.alpha == pytest.approx(0.2, abs=1e-10)
    assert sol.c == pytest.approx(-0.75, abs=1e-10)


@given(st.floats(0.06, 0.94))
@settings(max_examples=8, deadline=None)
def test_oracle_agreement_over_radii(R):
    sol = solve_radial(MetricSpec.flat(2), Nonlinearity.constant(2.0), R)
    assert np.max(np.abs(sol.u - cap_oracle(2, R, 2.0).u)) <= 1e-8


@given(st.floats(0.1, 0.8), st.floats(0.5, 3.0), st.floats(0.0, 2.0))
@settings(max_examples=8, deadline=None)
def test_compatibility_on_converged_solutions(R, a, b):
    sol = solve_radial(MetricSpec.flat(2), Nonlinearity.affine(a, b), R, tol=1e-10)
    flux = radial_quadrature(sol, sol.flux, over="boundary")
    bulk = radial_quadrature(sol, sol.nl.f(sol.u))
    assert abs(flux - bulk) <= 10 * 1e-10


def test_monotone_shooting_map():
    sol = solve_radial(MetricSpec.flat(2), Nonlinearity.affine(2.0, 1.0), 0.6)
    alphas, vals = sol.scan
    finite = np.isfinite(vals)
    assert np.all(np.diff(vals[finite]) > 0)


def test_cap_oracle_examples():
    c = cap_oracle(2, 0.6, 2.0)
    assert c.c == pytest.approx(0.75, abs=1e-15)
    assert c.u[0] == pytest.approx(-0.2, abs=1e-15)
    assert np.max(np.abs(c.P - 1.6)) <= 1e-14
    assert cap_oracle(2, 1e-6, 2.0).c < 1e-5
    with pytest.raises(GeometryError):
        cap_oracle(2, 1.0, 2.0)


def test_quadrature_examples(cap):
    assert radial_quadrature(cap, 1.0) == pytest.approx(0.36 * np.pi, abs=1e-13)
    assert radial_quadrature(cap, 1.0, over="boundary") == pytest.approx(1.2 * np.pi, abs=1e-13)
    assert radial_quadrature(cap, lambda s: s.nl.f(s.u)) == pytest.approx(0.72 * np.pi, abs=1e-13)


def test_stiff_profile_when_cap_cannot_fit():
    with pytest.raises(StiffProfile):
        solve_radial(MetricSpec.flat(2), Nonlinearity.constant(2.0), 1.2)


def test_bracket_failure(monkeypatch):
    monkeypatch.setattr(radial, "_scan_window", lambda nl, n: (0.5, 1.0))
    with pytest.raises(BracketFailure):
        solve_radial(MetricSpec.flat(2), Nonlinearity.constant(2.0), 0.6)


def test_recomputed_residual_matches(cap):
    assert ode_residual(cap) == pytest.approx(cap.ode_residual, abs=1e-15)
    assert ode_residual(cap_oracle(2, 0.6, 2.0)) <= 1e-12


def test_runtime_budget():
    t = time.perf_counter()
    solve_radial(MetricSpec.flat(2), Nonlinearity.constant(2.0), 0.6)
    assert time.perf_counter() - t <= 1.0
