"""Ambient geometry for radial experiments.

Only rotationally symmetric metrics ``g = drho^2 + h(rho)^2 g_sphere`` are
represented, with ``h`` a polynomial satisfying ``h(0) = 0`` and ``h'(0) = 1``.
The flat metric is ``h(rho) = rho``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConfigError, GeometryError, HypothesisViolated


@dataclass(frozen=True)
class MetricSpec:
    n: int = 2
    h_coeffs: tuple[float, ...] = (0.0, 1.0)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError(f"dimension must be an integer >= 2, got {self.n}")
        c = tuple(float(x) for x in self.h_coeffs)
        c = c + (0.0,) * max(0, 2 - len(c))
        if c[0] != 0.0 or c[1] != 1.0:
            raise GeometryError("warp must satisfy h(0) = 0 and h'(0) = 1")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "h_coeffs", c)

    @classmethod
    def flat(cls, n=2):
        return cls(n, (0.0, 1.0))

    @property
    def is_flat(self) -> bool:
        return all(x == 0.0 for x in self.h_coeffs[2:])

    def h(self, rho):
        return P.polyval(rho, self.h_coeffs)

    def dh(self, rho):
        return P.polyval(rho, P.polyder(self.h_coeffs))

    def d2h(self, rho):
        return P.polyval(rho, P.polyder(self.h_coeffs, 2))

    @property
    def sphere_area(self) -> float:
        """Area of the unit round sphere S^{n-1}."""
        return 2.0 * pi ** (self.n / 2) / gamma(self.n / 2)

    def check_admissible(self, R: float, samples: int = 2049):
        """Raise unless ``h > 0`` and ``h' > 0`` on ``(0, R]``."""
        rho = np.linspace(0.0, R, samples)[1:]
        if np.any(self.h(rho) <= 0.0) or np.any(self.dh(rho) <= 0.0):
            raise GeometryError(f"warp degenerates on (0, {R}]: h or h' not positive")

    def to_dict(self) -> dict:
        if self.is_flat:
            return {"n": self.n, "warp": "flat"}
        return {"n": self.n, "warp": {"coeffs": list(self.h_coeffs)}}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricSpec":
        extra = set(d) - {"n", "warp"}
        if extra:
            raise ConfigError(f"unknown keys in metric: {sorted(extra)}")
        n = d.get("n", 2)
        if not isinstance(n, int) or isinstance(n, bool):
            raise ConfigError("metric.n must be an integer")
        warp = d.get("warp", "flat")
        if warp == "flat":
            return cls.flat(n)
        if isinstance(warp, dict) and set(warp) == {"coeffs"}:
            return cls(n, tuple(float(x) for x in warp["coeffs"]))
        raise ConfigError(f"bad warp specification {warp!r}")


def sphere_mean_curvature(m: MetricSpec, rho: float) -> float:
    """Mean curvature of the geodesic sphere of radius ``rho``.

    Outward normal convention: ``-h'(rho) / h(rho)``, so ``-1/rho`` when flat.
    """
    if rho <= 0:
        raise GeometryError("sphere radius must be positive")
    return float(-m.dh(rho) / m.h(rho))


def check_ricci_sign(m: MetricSpec, R: float, samples: int = 4097) -> bool:
    """Radial sufficient condition for Ric >= 0: ``h'' <= 0`` on ``[0, R]``."""
    if R <= 0:
        raise GeometryError("R must be positive")
    rho = np.linspace(0.0, R, samples)
    return bool(np.all(m.d2h(rho) <= 0.0))


@dataclass(frozen=True)
class ConformalField:
    """Closed conformal field ``h(rho) d/drho`` with factor ``phi = h'(rho)``.

    In the flat case this is the position vector ``x - base``; ``base`` only
    matters for non-radial evaluations on 2-D domains.
    """

    metric: MetricSpec = field(default_factory=MetricSpec.flat)
    base: tuple[float, float] = (0.0, 0.0)

    def phi(self, rho):
        return self.metric.dh(rho)

    def log_gradient(self, rho):
        """Radial component of ``D ln(phi)``, i.e. ``h''/h'``."""
        return conformal_log_gradient(self, rho)

    def normal_component(self, rho):
        """``<Upsilon, d/drho>`` on the geodesic sphere of radius ``rho``."""
        return self.metric.h(rho)

    def check_positive(self, R: float, samples: int = 2049) -> bool:
        rho = np.linspace(0.0, R, samples)
        return bool(np.all(self.phi(rho) > 0.0))


def conformal_log_gradient(cf: ConformalField, rho):
    phi = cf.phi(rho)
    if np.any(np.asarray(phi) <= 0.0):
        raise HypothesisViolated("phi > 0", "conformal factor is not positive")
    return cf.metric.d2h(rho) / phi
