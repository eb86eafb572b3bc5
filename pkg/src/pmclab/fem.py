"""Piecewise-linear finite elements for ``div(Du/w) = f(u)``, ``u = 0`` on the boundary.

Weak form: ``int <Du/w, Dv> + int f(u) v = 0`` for every ``v`` vanishing on the
boundary. On linear elements ``Du`` and ``w`` are element constants, so the flux
integrals are exact; the ``f`` term uses one-point (barycentre) quadrature.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ContinuationStalled, JacobianSingular, NewtonDiverged, StiffBoundary
from .geometry import BoundaryTrace
from .mesh import Mesh, mesh_polar, refine
from .nonlinearity import Nonlinearity

log = logging.getLogger(__name__)


@dataclass
class FemOptions:
    newton_tol: float = 1e-10
    max_iter: int = 50
    continuation_steps: int = 4
    max_halvings: int = 30


@dataclass(frozen=True, eq=False)
class P1Geometry:
    """Element areas and barycentric-coordinate gradients."""

    areas: np.ndarray
    grads: np.ndarray  # (T, 3, 2)

    @classmethod
    def of(cls, mesh: Mesh) -> "P1Geometry":
        p = mesh.points[mesh.triangles]
        A = mesh.areas
        g = np.empty((len(A), 3, 2))
        for i in range(3):
            a, b = p[:, (i + 1) % 3], p[:, (i + 2) % 3]
            g[:, i, 0] = (a[:, 1] - b[:, 1]) / (2 * A)
            g[:, i, 1] = (b[:, 0] - a[:, 0]) / (2 * A)
        return cls(A, g)


def gradients(mesh: Mesh, geo: P1Geometry, u: np.ndarray) -> np.ndarray:
    return np.einsum("ti,tik->tk", u[mesh.triangles], geo.grads)


def flux_jacobian(Du: np.ndarray) -> np.ndarray:
    """Derivative of ``Du/w`` with respect to ``Du``: ``I/w - Du Du^T / w^3``."""
    w = np.sqrt(1.0 + np.sum(Du**2, axis=-1))
    eye = np.eye(2)
    return eye / w[..., None, None] - np.einsum("...i,...j->...ij", Du, Du) / w[..., None, None] ** 3


def _element_residual(mesh, geo, u, nl):
    Du = gradients(mesh, geo, u)
    w = np.sqrt(1.0 + np.sum(Du**2, axis=1))
    X = Du / w[:, None]
    ubar = u[mesh.triangles].mean(axis=1)
    loc = geo.areas[:, None] * (np.einsum("tk,tik->ti", X, geo.grads) + nl.f(ubar)[:, None] / 3.0)
    return loc, Du, ubar


def weak_residual(mesh: Mesh, u: np.ndarray, nl: Nonlinearity, geo: P1Geometry | None = None) -> np.ndarray:
    """Full nodal residual vector, boundary rows included."""
    geo = geo or P1Geometry.of(mesh)
    loc, _, _ = _element_residual(mesh, geo, u, nl)
    return np.bincount(mesh.triangles.ravel(), loc.ravel(), minlength=mesh.n_vertices)


def jacobian(mesh: Mesh, u: np.ndarray, nl: Nonlinearity, geo: P1Geometry | None = None) -> sp.csr_matrix:
    geo = geo or P1Geometry.of(mesh)
    Du = gradients(mesh, geo, u)
    K = flux_jacobian(Du)
    ubar = u[mesh.triangles].mean(axis=1)
    loc = np.einsum("tia,tab,tjb->tij", geo.grads, K, geo.grads) * geo.areas[:, None, None]
    loc += (nl.f_prime(ubar) * geo.areas / 9.0)[:, None, None]
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    V = mesh.n_vertices
    return sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(V, V)).tocsr()


def stiffness(mesh: Mesh, geo: P1Geometry | None = None) -> sp.csr_matrix:
    """Plain P1 Laplacian stiffness matrix ``int <D phi_i, D phi_j>``."""
    geo = geo or P1Geometry.of(mesh)
    loc = np.einsum("tia,tja->tij", geo.grads, geo.grads) * geo.areas[:, None, None]
    t = mesh.triangles
    V = mesh.n_vertices
    return sp.coo_matrix(
        (loc.ravel(), (np.repeat(t, 3, axis=1).ravel(), np.tile(t, (1, 3)).ravel())), shape=(V, V)
    ).tocsr()


@dataclass(frozen=True, eq=False)
class FemSolution:
    mesh: Mesh
    u: np.ndarray
    nl: Nonlinearity
    grad: np.ndarray
    w: np.ndarray
    iterations: list = field(default_factory=list)
    options: FemOptions = field(default_factory=FemOptions)

    n = 2

    @property
    def geo(self) -> P1Geometry:
        return P1Geometry.of(self.mesh)

    def integral_f(self) -> float:
        """``int f(u)`` with the same barycentre rule as the weak residual."""
        ubar = self.u[self.mesh.triangles].mean(axis=1)
        return float(np.dot(self.mesh.areas, self.nl.f(ubar)))

    def integrate_nodal(self, func) -> float:
        """``int g(u, x)`` by the edge-midpoint rule (exact for quadratics)."""
        t = self.mesh.triangles
        total = 0.0
        for a, b in ((0, 1), (1, 2), (2, 0)):
            um = 0.5 * (self.u[t[:, a]] + self.u[t[:, b]])
            xm = 0.5 * (self.mesh.points[t[:, a]] + self.mesh.points[t[:, b]])
            total += np.dot(self.mesh.areas, func(um, xm))
        return float(total / 3.0)

    def integrate_elementwise(self, values) -> float:
        return float(np.dot(self.mesh.areas, values))

    @property
    def newton_steps(self) -> int:
        return sum(1 for rec in self.iterations if rec["damping"] > 0)


def solve_fem(mesh: Mesh, nl: Nonlinearity, opts: FemOptions | None = None) -> FemSolution:
    """Damped Newton with continuation ``f -> s f`` for ``s = 1/k, 2/k, ..., 1``.

    Convergence is declared when the Newton decrement ``sqrt(r . J^{-1} r)``
    (the residual in the dual norm of the linearized operator) drops below
    ``newton_tol``. Backtracking halves the step until the Euclidean residual
    norm decreases.
    """
    opts = opts or FemOptions()
    geo = P1Geometry.of(mesh)
    free = ~mesh.is_boundary
    u = np.zeros(mesh.n_vertices)
    records = []
    steps = max(1, int(opts.continuation_steps))
    for k in range(1, steps + 1):
        s = k / steps
        nls = nl.scaled(s)
        converged = False
        r = weak_residual(mesh, u, nls, geo)[free]
        rnorm = float(np.linalg.norm(r))
        for it in range(opts.max_iter):
            if rnorm == 0.0:
                converged = True
                break
            J = jacobian(mesh, u, nls, geo)[free][:, free].tocsc()
            try:
                lu = splu(J)
            except RuntimeError as exc:
                raise JacobianSingular(str(exc)) from None
            delta = lu.solve(-r)
            if not np.all(np.isfinite(delta)):
                raise JacobianSingular("non-finite Newton update")
            decrement = float(np.sqrt(abs(np.dot(r, delta))))
            t = 1.0
            for _ in range(opts.max_halvings + 1):
                trial = u.copy()
                trial[free] += t * delta
                r_new = weak_residual(mesh, trial, nls, geo)[free]
                new_norm = float(np.linalg.norm(r_new))
                if np.isfinite(new_norm) and new_norm <= (1.0 - 1e-4 * t) * rnorm:
                    break
                t *= 0.5
            else:
                if decrement <= opts.newton_tol:
                    records.append(dict(scale=s, iteration=it, residual=rnorm, decrement=decrement, damping=0.0))
                    converged = True
                    break
                raise NewtonDiverged(f"no residual decrease after {opts.max_halvings} halvings (s={s})")
            u = trial
            records.append(dict(scale=s, iteration=it, residual=new_norm, decrement=decrement, damping=t))
            log.debug("s=%.2f it=%d |r|=%.3e dec=%.3e t=%g", s, it, new_norm, decrement, t)
            r, rnorm = r_new, new_norm
            if decrement <= opts.newton_tol:
                converged = True
                break
        if not converged:
            raise ContinuationStalled(f"Newton did not converge in {opts.max_iter} iterations at s={s}")
    Du = gradients(mesh, geo, u)
    return FemSolution(
        mesh=mesh,
        u=u,
        nl=nl,
        grad=Du,
        w=np.sqrt(1.0 + np.sum(Du**2, axis=1)),
        iterations=records,
        options=opts,
    )


def boundary_mass(mesh: Mesh) -> sp.csr_matrix:
    """P1 mass matrix on the boundary polygon, indexed by boundary-cycle position."""
    order = mesh.boundary_vertices
    pos = np.full(mesh.n_vertices, -1)
    pos[order] = np.arange(order.size)
    e = pos[mesh.boundary_edges]
    _, length = mesh.edge_normals()
    loc = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    vals = length[:, None, None] * loc
    rows = np.repeat(e, 2, axis=1).ravel()
    cols = np.tile(e, (1, 2)).ravel()
    nb = order.size
    return sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(nb, nb)).tocsr()


def _vertex_normals(mesh: Mesh, order: np.ndarray):
    nu_e, length = mesh.edge_normals()
    acc = np.zeros((mesh.n_vertices, 2))
    for k in range(2):
        np.add.at(acc, mesh.boundary_edges[:, k], nu_e * length[:, None])
    acc = acc[order]
    return acc / np.linalg.norm(acc, axis=1)[:, None]


def _discrete_curvature(mesh: Mesh, order: np.ndarray, weights: np.ndarray) -> np.ndarray:
    p = mesh.points[order]
    d_in = p - np.roll(p, 1, axis=0)
    d_out = np.roll(p, -1, axis=0) - p
    turn = np.arctan2(d_in[:, 0] * d_out[:, 1] - d_in[:, 1] * d_out[:, 0], np.sum(d_in * d_out, axis=1))
    return -turn / weights


def boundary_geometry(mesh: Mesh) -> BoundaryTrace:
    """Trace at the boundary vertices with lumped polygon weights.

    Normals and curvature come from the exact domain when the mesh carries
    one, else from the polygon.
    """
    order = mesh.boundary_vertices
    M = boundary_mass(mesh)
    weights = np.asarray(M.sum(axis=1)).ravel()
    pts = mesh.points[order]
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    if mesh.domain is not None:
        nu, _ = mesh.domain.normal(theta)
        H = mesh.domain.curvature(theta)
    else:
        nu = _vertex_normals(mesh, order)
        H = _discrete_curvature(mesh, order, weights)
    return BoundaryTrace(theta=theta, points=pts, normals=nu, weights=weights, Htilde=H,
                         extra={"vertices": order})


def recover_boundary_flux(sol: FemSolution, check: bool = True) -> BoundaryTrace:
    """Boundary flux ``q = u_nu/w`` from the weak residual at boundary hats.

    Solves ``M_b q = r_b`` where ``r_b[i] = int <Du/w, D phi_i> + int f(u) phi_i``
    so that ``sum_i q_i * weight_i = int f(u)`` whenever the interior rows vanish.
    """
    mesh = sol.mesh
    trace = boundary_geometry(mesh)
    order = trace.extra["vertices"]
    r = weak_residual(mesh, sol.u, sol.nl)
    q = splu(boundary_mass(mesh).tocsc()).solve(r[order])
    if check and np.any(np.abs(q) >= 1.0):
        k = int(np.argmax(np.abs(q)))
        raise StiffBoundary(f"|q| = {abs(q[k]):.6f} >= 1 at boundary vertex {order[k]}")
    return trace.with_flux(q)


def convergence_sweep(d, nl: Nonlinearity, levels: int, nr: int = 8, ntheta: int = 32,
                      exact=None, opts: FemOptions | None = None) -> list[dict]:
    """Solve on ``levels`` uniformly refined meshes and tabulate max-norm errors.

    ``exact`` maps points ``(N, 2)`` to exact values; without it errors are
    measured against the finest level at the shared (coarse) vertices.
    """
    if levels < 2:
        raise ValueError("convergence sweep needs at least two levels")
    mesh = mesh_polar(d, nr, ntheta)
    sols = []
    for lev in range(levels):
        if lev:
            mesh = refine(mesh)
        sols.append(solve_fem(mesh, nl, opts))
    rows = []
    for lev, sol in enumerate(sols):
        if exact is not None:
            err = float(np.max(np.abs(sol.u - exact(sol.mesh.points))))
        elif lev == levels - 1:
            err = 0.0
        else:
            V = sol.mesh.n_vertices
            err = float(np.max(np.abs(sol.u - sols[-1].u[:V])))
        rows.append({"level": lev, "h": sol.mesh.h, "vertices": sol.mesh.n_vertices, "error": err, "order": None})
    for a, b in zip(rows, rows[1:]):
        if a["error"] > 0 and b["error"] > 0:
            b["order"] = float(np.log(a["error"] / b["error"]) / np.log(2.0))
    return rows
