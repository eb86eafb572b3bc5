"""Closed-form right-hand sides ``f`` with exact antiderivative and derivative."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConfigError


@dataclass(frozen=True)
class Nonlinearity:
    """Polynomial right-hand side ``f(u) = c0 + c1 u + ... + ck u^k``.

    ``affine(a, b)`` is the special case ``f(u) = a + b u``. The antiderivative
    ``F`` is normalized so that ``F(0) = 0``.
    """

    coeffs: tuple[float, ...]
    kind: str = "polynomial"

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        if not c:
            c = (0.0,)
        if not all(np.isfinite(c)):
            raise ConfigError("nonlinearity coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def affine(cls, a, b=0.0):
        return cls((a, b), kind="affine")

    @classmethod
    def polynomial(cls, *coeffs):
        return cls(tuple(coeffs), kind="polynomial")

    @classmethod
    def constant(cls, a):
        return cls.affine(a, 0.0)

    @property
    def f0(self) -> float:
        return self.coeffs[0]

    @property
    def is_constant(self) -> bool:
        return all(c == 0.0 for c in self.coeffs[1:])

    def f(self, u):
        return P.polyval(u, self.coeffs)

    def F(self, u):
        return P.polyval(u, P.polyint(self.coeffs))

    def f_prime(self, u):
        return P.polyval(u, P.polyder(self.coeffs))

    def f_plus(self, u):
        return np.maximum(self.f(u), 0.0)

    def scaled(self, s: float) -> "Nonlinearity":
        """``s * f``, used by amplitude continuation."""
        return Nonlinearity(tuple(s * c for c in self.coeffs), kind=self.kind)

    def is_monotone_on(self, u) -> bool:
        """True when ``f'(u) >= 0`` at every sampled value."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return bool(np.all(self.f_prime(u) >= 0.0))

    def to_dict(self) -> dict:
        if self.kind == "affine":
            a, b = (self.coeffs + (0.0,))[:2]
            return {"kind": "affine", "a": a, "b": b}
        return {"kind": "polynomial", "coeffs": list(self.coeffs)}

    @classmethod
    def from_dict(cls, d: dict) -> "Nonlinearity":
        kind = d.get("kind")
        if kind == "affine":
            extra = set(d) - {"kind", "a", "b"}
            if extra:
                raise ConfigError(f"unknown keys in f: {sorted(extra)}")
            return cls.affine(float(d["a"]), float(d.get("b", 0.0)))
        if kind == "polynomial":
            extra = set(d) - {"kind", "coeffs"}
            if extra:
                raise ConfigError(f"unknown keys in f: {sorted(extra)}")
            coeffs = d.get("coeffs")
            if not isinstance(coeffs, list) or not coeffs:
                raise ConfigError("polynomial f needs a non-empty 'coeffs' list")
            return cls.polynomial(*map(float, coeffs))
        raise ConfigError(f"unknown nonlinearity kind {kind!r}")


# functional aliases mirroring the operation names
def eval_f(nl: Nonlinearity, u):
    return nl.f(u)


def eval_F(nl: Nonlinearity, u):
    return nl.F(u)


def eval_f_prime(nl: Nonlinearity, u):
    return nl.f_prime(u)


def eval_f_plus(nl: Nonlinearity, u):
    return nl.f_plus(u)
