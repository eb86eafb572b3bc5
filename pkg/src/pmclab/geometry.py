"""Star-shaped planar domains given by a polar boundary ``r(theta)``.

Curvature uses the outward normal convention in which convex boundaries have
negative mean curvature (``-1/R`` on a circle of radius ``R``).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, GeometryError


@dataclass(frozen=True)
class Domain2D:
    kind: str
    params: tuple[float, ...]
    sin_coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("disk", "ellipse", "radial_graph"):
            raise ConfigError(f"unknown domain kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(x) for x in self.params))
        object.__setattr__(self, "sin_coeffs", tuple(float(x) for x in self.sin_coeffs))
        if self.kind == "disk" and (len(self.params) != 1 or self.params[0] <= 0):
            raise GeometryError("disk needs one positive radius")
        if self.kind == "ellipse" and (len(self.params) != 2 or min(self.params) <= 0):
            raise GeometryError("ellipse needs positive semi-axes a, b")
        if self.kind == "radial_graph":
            if not self.params:
                raise GeometryError("radial_graph needs at least the mean radius")
            th = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
            if np.min(self.r(th)) <= 0.0:
                raise GeometryError("r(theta) is not positive: boundary self-intersects the origin")

    @classmethod
    def disk(cls, R):
        return cls("disk", (R,))

    @classmethod
    def ellipse(cls, a, b):
        return cls("ellipse", (a, b))

    @classmethod
    def radial_graph(cls, cos_coeffs, sin_coeffs=()):
        """``r(theta) = sum_k a_k cos(k theta) + b_k sin(k theta)``; ``b_0`` is ignored."""
        return cls("radial_graph", tuple(cos_coeffs), tuple(sin_coeffs))

    def _derivs(self, theta):
        th = np.asarray(theta, dtype=float)
        if self.kind == "disk":
            R = self.params[0]
            z = np.zeros_like(th)
            return R + z, z, z
        if self.kind == "ellipse":
            a, b = self.params
            k = a * a - b * b
            D = b * b + k * np.sin(th) ** 2
            D1 = k * np.sin(2 * th)
            D2 = 2 * k * np.cos(2 * th)
            r = a * b * D**-0.5
            r1 = -0.5 * a * b * D**-1.5 * D1
            r2 = a * b * (0.75 * D**-2.5 * D1**2 - 0.5 * D**-1.5 * D2)
            return r, r1, r2
        ca = np.asarray(self.params)
        sb = np.zeros_like(ca)
        sb[: len(self.sin_coeffs)] = self.sin_coeffs[: len(ca)]
        k = np.arange(ca.size)
        kt = np.multiply.outer(th, k)
        cos, sin = np.cos(kt), np.sin(kt)
        r = cos @ ca + sin @ sb
        r1 = (-sin * k) @ ca + (cos * k) @ sb
        r2 = (-cos * k**2) @ ca + (-sin * k**2) @ sb
        return r, r1, r2

    def r(self, theta):
        return self._derivs(theta)[0]

    def point(self, theta):
        th = np.asarray(theta, dtype=float)
        r = self.r(th)
        return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)

    def project(self, xy):
        """Radial projection of points onto the boundary curve."""
        xy = np.asarray(xy, dtype=float)
        return self.point(np.arctan2(xy[..., 1], xy[..., 0]))

    def normal(self, theta):
        """Outward unit normal and speed ``|d point / d theta|``."""
        th = np.asarray(theta, dtype=float)
        r, r1, _ = self._derivs(th)
        tx = r1 * np.cos(th) - r * np.sin(th)
        ty = r1 * np.sin(th) + r * np.cos(th)
        speed = np.hypot(tx, ty)
        return np.stack([ty / speed, -tx / speed], axis=-1), speed

    def curvature(self, theta):
        """Signed mean curvature, negative where the boundary is convex."""
        r, r1, r2 = self._derivs(theta)
        kappa = (r * r + 2 * r1 * r1 - r * r2) / (r * r + r1 * r1) ** 1.5
        return -kappa

    def to_dict(self) -> dict:
        if self.kind == "disk":
            return {"kind": "disk", "R": self.params[0]}
        if self.kind == "ellipse":
            return {"kind": "ellipse", "a": self.params[0], "b": self.params[1]}
        return {"kind": "radial_graph", "cos": list(self.params), "sin": list(self.sin_coeffs)}

    @classmethod
    def from_dict(cls, d: dict) -> "Domain2D":
        kind = d.get("kind")
        allowed = {
            "disk": {"kind", "R"},
            "ellipse": {"kind", "a", "b"},
            "radial_graph": {"kind", "cos", "sin"},
        }
        if kind not in allowed:
            raise ConfigError(f"unknown domain kind {kind!r}")
        extra = set(d) - allowed[kind]
        if extra:
            raise ConfigError(f"unknown keys in domain: {sorted(extra)}")
        try:
            if kind == "disk":
                return cls.disk(float(d["R"]))
            if kind == "ellipse":
                return cls.ellipse(float(d["a"]), float(d["b"]))
            return cls.radial_graph([float(x) for x in d["cos"]], [float(x) for x in d.get("sin", [])])
        except KeyError as exc:
            raise ConfigError(f"domain {kind} missing key {exc}") from None


def boundary_curvature(d: Domain2D, theta) -> float:
    return d.curvature(theta)


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Boundary samples with geometry and, optionally, solution data.

    ``q`` is the flux ``u_nu/w``; ``u_nu`` and ``w`` follow from it because
    ``Du = u_nu nu`` wherever ``u`` vanishes.
    """

    theta: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    Htilde: np.ndarray
    q: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def length(self) -> float:
        return float(np.sum(self.weights))

    @property
    def u_nu(self):
        if self.q is None:
            return None
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(np.abs(self.q) < 1.0, self.q / np.sqrt(np.maximum(1.0 - self.q**2, 0.0)), np.copysign(np.inf, self.q))

    @property
    def w(self):
        if self.q is None:
            return None
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(np.abs(self.q) < 1.0, 1.0 / np.sqrt(np.maximum(1.0 - self.q**2, 0.0)), np.inf)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, np.broadcast_to(values, self.weights.shape)))

    def with_flux(self, q) -> "BoundaryTrace":
        q = np.broadcast_to(np.asarray(q, dtype=float), self.weights.shape).copy()
        return replace(self, q=q)


def boundary_trace(d: Domain2D, samples: int = 256) -> BoundaryTrace:
    """Uniform-in-angle samples; the periodic trapezoid rule gives the weights."""
    if samples < 16:
        raise ValueError("need at least 16 boundary samples")
    th = 2 * np.pi * np.arange(samples) / samples
    if np.min(d.r(th)) <= 0.0:
        raise GeometryError("boundary self-intersects: r(theta) <= 0")
    nu, speed = d.normal(th)
    return BoundaryTrace(
        theta=th,
        points=d.point(th),
        normals=nu,
        weights=speed * (2 * np.pi / samples),
        Htilde=d.curvature(th),
    )
