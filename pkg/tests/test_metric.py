import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmclab.errors import ConfigError, GeometryError, HypothesisViolated
from pmclab.metric import ConformalField, MetricSpec, check_ricci_sign, conformal_log_gradient, sphere_mean_curvature

WARP = MetricSpec(2, (0, 1, 0, -0.1))


def test_sphere_mean_curvature_examples():
    assert sphere_mean_curvature(MetricSpec.flat(2), 0.5) == pytest.approx(-2.0, abs=1e-15)
    assert sphere_mean_curvature(MetricSpec.flat(2), 0.6) == pytest.approx(-5 / 3, abs=1e-15)
    assert sphere_mean_curvature(WARP, 0.6) == pytest.approx(-(1 - 0.108) / (0.6 - 0.0216), abs=1e-14)
    with pytest.raises(GeometryError):
        sphere_mean_curvature(WARP, 0.0)


@given(st.floats(1e-3, 50))
def test_flat_sphere_curvature_times_radius(rho):
    assert sphere_mean_curvature(MetricSpec.flat(3), rho) * rho == pytest.approx(-1.0, rel=1e-14)


@given(st.floats(1e-3, 0.99))
def test_geodesic_spheres_are_mean_convex(rho):
    assert sphere_mean_curvature(WARP, rho) < 0


def test_ricci_sign():
    assert check_ricci_sign(MetricSpec.flat(2), 3.0)
    assert check_ricci_sign(WARP, 0.6)
    assert not check_ricci_sign(MetricSpec(2, (0, 1, 0, 0.1)), 0.6)


def test_conformal_log_gradient():
    assert conformal_log_gradient(ConformalField(MetricSpec.flat(2)), 0.4) == 0.0
    assert conformal_log_gradient(ConformalField(WARP), 0.5) == pytest.approx(-0.3 / 0.925, abs=1e-15)
    assert conformal_log_gradient(ConformalField(WARP), 0.0) == 0.0
    with pytest.raises(HypothesisViolated) as exc:
        conformal_log_gradient(ConformalField(WARP), 2.0)  # h'(2) = -0.2
    assert exc.value.hypothesis == "phi > 0"


@given(st.floats(0.05, 0.9))
def test_divergence_of_conformal_field(rho):
    # div(h d/drho) = h^{1-n} (h^{n-1} h)' = n h' in the warped volume form
    n, eps = 3, 1e-3
    m = MetricSpec(n, WARP.h_coeffs)
    g = lambda r: m.h(r) ** (n - 1) * m.h(r)
    dg = (-g(rho + 2 * eps) + 8 * g(rho + eps) - 8 * g(rho - eps) + g(rho - 2 * eps)) / (12 * eps)
    div = dg / m.h(rho) ** (n - 1)
    assert div == pytest.approx(n * ConformalField(m).phi(rho), abs=1e-8)


def test_validation_and_dict():
    with pytest.raises(GeometryError):
        MetricSpec(2, (0.1, 1.0))
    with pytest.raises(ConfigError):
        MetricSpec.from_dict({"n": 2, "warp": "curved"})
    with pytest.raises(ConfigError):
        MetricSpec.from_dict({"n": 2, "extra": 1})
    assert MetricSpec.from_dict(WARP.to_dict()) == WARP
    assert MetricSpec.flat(3).sphere_area == pytest.approx(4 * np.pi)
    with pytest.raises(GeometryError):
        WARP.check_admissible(2.0)
