"""Conformal self-maps of the unit ball and moment balancing.

A map is parameterized as Phi = R . T_b with R orthogonal and T_b the
standard ball automorphism with base point b (|b| < 1),

    T_b(x) = ((1 - |b|^2)(x - b) - |x - b|^2 b) / (1 - 2<x,b> + |b|^2 |x|^2),

which satisfies T_0 = id, T_b(b) = 0, T_b(0) = -b and T_b^{-1} = T_{-b}.
T_b is conformal with factor lambda(x) = (1 - |b|^2) / (1 - 2<x,b> +
|b|^2 |x|^2); its Jacobian determinant has absolute value lambda^{n+1},
and the restriction to the sphere is a conformal map with boundary
Jacobian lambda^n.

Balancing finds the map whose pullback kills the first moments of a
positive boundary measure; a damped fixed-point iteration on the base
point suffices (the moment map is a contraction near the balanced point),
with step bisection on overshoot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConvergenceError, DomainError, ValidationError
from .jets import Jet2, MapJet, jet_power

__all__ = ["MobiusMap", "balance", "balance_density", "random_map"]


def _quadratic_jets(points, const, lin, quad_scalar, order):
    """Jet of const + <lin, x> + quad_scalar * |x|^2 at a batch of points."""
    points = np.asarray(points, dtype=float)
    N, m = points.shape
    value = const + points @ lin + quad_scalar * np.einsum("ni,ni->n", points, points)
    grad = lin[None, :] + 2.0 * quad_scalar * points
    hess = np.broadcast_to(2.0 * quad_scalar * np.eye(m), (N, m, m)).copy()
    third = np.zeros((N, m, m, m)) if order >= 3 else None
    return Jet2(value, grad, hess, third)


@dataclass(frozen=True)
class MobiusMap:
    """A conformal diffeomorphism of the closed unit ball."""

    rotation: np.ndarray  # orthogonal (n+1, n+1)
    base_point: np.ndarray  # |b| < 1

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        b = np.asarray(self.base_point, dtype=float)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "base_point", b)
        if R.ndim != 2 or R.shape[0] != R.shape[1] or R.shape[0] != b.shape[0]:
            raise ValidationError("rotation/base point dimensions disagree")
        if np.linalg.norm(R.T @ R - np.eye(len(b))) > 1e-10:
            raise ValidationError("rotation matrix is not orthogonal")
        if np.linalg.norm(b) >= 1.0:
            raise ValidationError("base point must lie in the open unit ball")

    @staticmethod
    def identity(n: int) -> "MobiusMap":
        return MobiusMap(np.eye(n + 1), np.zeros(n + 1))

    @property
    def m(self) -> int:
        return len(self.base_point)

    def _denominator(self, points: np.ndarray) -> np.ndarray:
        b = self.base_point
        points = np.asarray(points, dtype=float)
        return (
            1.0
            - 2.0 * points @ b
            + (b @ b) * np.einsum("...i,...i->...", points, points)
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Image of one or many points of the closed ball."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if np.any(np.einsum("ni,ni->n", pts, pts) > 1.0 + 1e-12):
            raise DomainError("point outside the closed unit ball")
        b = self.base_point
        bb = b @ b
        diff = pts - b
        dist2 = np.einsum("ni,ni->n", diff, diff)
        num = (1.0 - bb) * diff - dist2[:, None] * b
        out = num / self._denominator(pts)[:, None]
        out = out @ self.rotation.T
        return out if np.asarray(points).ndim > 1 else out[0]

    def conformal_factor(self, points: np.ndarray) -> np.ndarray:
        """Pointwise lambda with D Phi^T D Phi = lambda^2 I."""
        bb = self.base_point @ self.base_point
        return (1.0 - bb) / self._denominator(np.atleast_2d(points))

    def jacobian_det(self, points: np.ndarray) -> np.ndarray:
        """Absolute Jacobian determinant of the ambient map."""
        lam = self.conformal_factor(points)
        out = lam ** self.m
        return out if np.asarray(points).ndim > 1 else out[0]

    def boundary_jacobian(self, points: np.ndarray) -> np.ndarray:
        """Jacobian of the restricted sphere-to-sphere map."""
        lam = self.conformal_factor(points)
        out = lam ** (self.m - 1)
        return out if np.asarray(points).ndim > 1 else out[0]

    def inverse(self) -> "MobiusMap":
        R = self.rotation
        return MobiusMap(R.T, -(R @ self.base_point))

    def map_jet(self, points: np.ndarray, order: int = 2) -> MapJet:
        """Exact derivatives of the map up to the requested order."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        N, m = pts.shape
        b = self.base_point
        bb = b @ b
        dj = _quadratic_jets(pts, 1.0, -2.0 * b, bb, order)
        dinv = jet_power(dj, -1.0)
        value = np.empty((N, m))
        jac = np.empty((N, m, m))
        d2 = np.empty((N, m, m, m)) if order >= 2 else None
        d3 = np.empty((N, m, m, m, m)) if order >= 3 else None
        for k in range(m):
            ek = np.zeros(m)
            ek[k] = 1.0
            # N_k = (1-|b|^2)(x_k - b_k) - |x - b|^2 b_k
            lin = (1.0 - bb) * ek + 2.0 * b[k] * b
            const = -(1.0 - bb) * b[k] - bb * b[k]
            nk = _quadratic_jets(pts, const, lin, -b[k], order)
            comp = _jet_mul_trunc(nk, dinv, order)
            value[:, k] = comp.value
            jac[:, k] = comp.gradient
            if order >= 2:
                d2[:, k] = comp.hessian
            if order >= 3:
                d3[:, k] = comp.third
        R = self.rotation
        value = value @ R.T
        jac = np.einsum("kl,nli->nki", R, jac)
        if order >= 2:
            d2 = np.einsum("kl,nlij->nkij", R, d2)
        if order >= 3:
            d3 = np.einsum("kl,nlijq->nkijq", R, d3)
        return MapJet(value, jac, d2, d3)

    def to_spec(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "base_point": self.base_point.tolist(),
        }

    @staticmethod
    def from_spec(spec: dict) -> "MobiusMap":
        try:
            return MobiusMap(
                np.asarray(spec["rotation"], dtype=float),
                np.asarray(spec["base_point"], dtype=float),
            )
        except KeyError as exc:
            raise ValidationError(f"map spec missing field {exc}") from exc


def _jet_mul_trunc(a: Jet2, binv: Jet2, order: int) -> Jet2:
    from .jets import jet_mul

    out = jet_mul(a, binv)
    if order < 3:
        out = Jet2(out.value, out.gradient, out.hessian if order >= 2 else None)
    return out


def random_map(n: int, rng: np.random.Generator, b_max: float = 0.3) -> MobiusMap:
    """Seeded random map: Haar-ish rotation and a base point with |b| <= b_max."""
    m = n + 1
    A = rng.standard_normal((m, m))
    Q, Rq = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(Rq))
    direction = rng.standard_normal(m)
    direction /= np.linalg.norm(direction)
    b = rng.uniform(0.0, b_max) * direction
    return MobiusMap(Q, b)


def balance_density(
    density: Callable,
    n: int,
    rule,
    tol: float = 1e-8,
    max_iter: int = 50,
    damping: float = 0.5,
) -> tuple:
    """Find Phi = T_b whose pullback balances a positive boundary density.

    `density(points)` returns the measure density at sphere points.  The
    pulled-back density is |J~_b| density(T_b x); its discrete moments on
    `rule` are driven below tol * mass.  Returns (map, iterations, moment
    norm).  Raises ConvergenceError with the final norm on failure.
    """

    nodes = rule.nodes
    weights = rule.weights

    def moment(b: np.ndarray) -> np.ndarray:
        phi = MobiusMap(np.eye(n + 1), b)
        jac = phi.boundary_jacobian(nodes)
        rho = weights * jac * density(phi.apply(nodes))
        if np.any(rho < 0):
            raise DomainError("boundary density is not positive")
        mass = np.einsum("n->", rho)
        return np.einsum("n,ni->i", rho, nodes) / mass

    b = np.zeros(n + 1)
    m_vec = moment(b)
    norm = float(np.linalg.norm(m_vec))
    for iteration in range(max_iter):
        if norm < tol:
            return MobiusMap(np.eye(n + 1), b), iteration, norm
        step = damping
        accepted = False
        for _ in range(40):
            candidate = b - step * m_vec
            if np.linalg.norm(candidate) >= 1.0 - 1e-9:
                step *= 0.5
                continue
            cand_moment = moment(candidate)
            cand_norm = float(np.linalg.norm(cand_moment))
            if cand_norm < norm or cand_norm < tol:
                b, m_vec, norm = candidate, cand_moment, cand_norm
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise ConvergenceError(
                f"balancing stalled at moment norm {norm:.3e}",
                residual=norm,
                iterations=iteration,
            )
    if norm < tol:
        return MobiusMap(np.eye(n + 1), b), max_iter, norm
    raise ConvergenceError(
        f"balancing did not reach tol={tol:.1e} in {max_iter} iterations "
        f"(final moment norm {norm:.3e})",
        residual=norm,
        iterations=max_iter,
    )


def balance(
    field,
    n: int,
    rule=None,
    tol: float = 1e-8,
    max_iter: int = 50,
    damping: float = 0.5,
) -> tuple:
    """Balance the boundary measure of a scalar field.

    The measure density is u^{4n/(n-3)} for n in {4, 5} (u must be positive
    on the boundary) and e^{3u} for n = 3.  Returns (map, iterations,
    final moment norm).
    """

    from .quadrature import DEFAULT_DEGREE, build_rule

    if rule is None:
        rule = build_rule("sphere", n, DEFAULT_DEGREE[n])
    if n == 3:
        density = lambda pts: np.exp(3.0 * field.values(pts))
    else:
        exponent = 4.0 * n / (n - 3.0)

        def density(pts):
            vals = field.values(pts)
            if np.any(vals <= 0.0):
                raise DomainError("field must be positive on the boundary")
            return vals ** exponent

    return balance_density(density, n, rule, tol=tol, max_iter=max_iter, damping=damping)


def pullback_factor(mp: MobiusMap, field, n: int):
    """Pull a field back through a map with the conformal weight attached.

    For n in {4, 5} the result is |J|^{(n-3)/(4(n+1))} (u o Phi); in the
    critical dimension n = 3 it is u o Phi + (1/4) log |J|.
    """

    from .fields import PullbackField

    return PullbackField(field, mp)
