"""Pointwise derivative data (jets) and exact Taylor arithmetic.

Everything in this package that differentiates a field does it through the
small calculus implemented here: truncated Taylor data (value, gradient,
Hessian, optionally third derivatives) propagated exactly through sums,
products, powers, logs and compositions with smooth maps.  No numerical
differentiation happens on the main path; finite differences appear only
as test oracles.

All containers are batched: a leading axis of arbitrary length is allowed
on every array, so a single call evaluates a whole quadrature grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CapabilityError, DomainError

__all__ = [
    "Jet2",
    "BoundaryJet",
    "MapJet",
    "jet_constant",
    "jet_coordinate",
    "jet_add",
    "jet_scale",
    "jet_mul",
    "jet_compose_scalar",
    "jet_power",
    "jet_log",
    "jet_exp",
    "jet_compose_map",
    "jet_linear_combination",
    "boundary_decompose",
]


@dataclass
class Jet2:
    """Derivatives of a scalar function at one or many points.

    value    : (...,)
    gradient : (..., m)
    hessian  : (..., m, m), exactly symmetric
    third    : (..., m, m, m) or None; present only when order-3 data was
               requested and the producing field supports it
    """

    value: np.ndarray
    gradient: Optional[np.ndarray] = None
    hessian: Optional[np.ndarray] = None
    third: Optional[np.ndarray] = None

    @property
    def order(self) -> int:
        if self.third is not None:
            return 3
        if self.hessian is not None:
            return 2
        if self.gradient is not None:
            return 1
        return 0

    @property
    def m(self) -> int:
        if self.gradient is None:
            raise CapabilityError("jet carries no gradient data")
        return self.gradient.shape[-1]

    def laplacian(self) -> np.ndarray:
        return np.trace(self.hessian, axis1=-2, axis2=-1)

    def grad_norm_sq(self) -> np.ndarray:
        return np.einsum("...i,...i->...", self.gradient, self.gradient)

    def require(self, order: int) -> "Jet2":
        if self.order < order:
            raise CapabilityError(
                f"order-{order} jet required but only order {self.order} available"
            )
        return self


@dataclass
class BoundaryJet:
    """Boundary decomposition of a jet at points of the unit sphere.

    The sphere is umbilic with unit mean curvature, so the interior
    Laplacian splits as lap = tangential_laplacian + hess(x, x) + n * eta,
    where eta is the outward normal derivative and n the sphere dimension.
    The full interior gradient/Hessian are retained alongside the split
    because several boundary operators mix tangential and ambient data.
    """

    point: np.ndarray
    value: np.ndarray
    normal_derivative: Optional[np.ndarray] = None
    tangential_gradient: Optional[np.ndarray] = None
    tangential_laplacian: Optional[np.ndarray] = None
    gradient: Optional[np.ndarray] = None
    hessian: Optional[np.ndarray] = None

    @property
    def order(self) -> int:
        if self.hessian is not None:
            return 2
        if self.gradient is not None:
            return 1
        return 0

    def tangential_grad_norm_sq(self) -> np.ndarray:
        return np.einsum(
            "...i,...i->...", self.tangential_gradient, self.tangential_gradient
        )

    def laplacian(self) -> np.ndarray:
        return np.trace(self.hessian, axis1=-2, axis2=-1)

    def require(self, order: int) -> "BoundaryJet":
        if self.order < order:
            raise CapabilityError(
                f"order-{order} boundary jet required but only order "
                f"{self.order} available"
            )
        return self


@dataclass
class MapJet:
    """Derivatives of a smooth map Phi: R^m -> R^m at a batch of points.

    value : (..., m)         Phi_k
    jac   : (..., m, m)      jac[..., k, i]     = d_i Phi_k
    d2    : (..., m, m, m)   d2[..., k, i, j]   = d_i d_j Phi_k
    d3    : (..., m, m, m, m) optional third derivatives
    """

    value: np.ndarray
    jac: np.ndarray
    d2: Optional[np.ndarray] = None
    d3: Optional[np.ndarray] = None


def _sym3_outer(hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
    # H_ij g_k + H_ik g_j + H_jk g_i
    a = hess[..., :, :, None] * grad[..., None, None, :]
    b = hess[..., :, None, :] * grad[..., None, :, None]
    c = hess[..., None, :, :] * grad[..., :, None, None]
    return a + b + c


def jet_constant(c: float, points: np.ndarray, order: int = 2) -> Jet2:
    """Jet of the constant function c at the given points."""
    base = np.broadcast_to(np.asarray(points)[..., 0], np.asarray(points).shape[:-1])
    m = np.asarray(points).shape[-1]
    shape = base.shape
    value = np.full(shape, float(c))
    if order == 0:
        return Jet2(value)
    grad = np.zeros(shape + (m,))
    if order == 1:
        return Jet2(value, grad)
    hess = np.zeros(shape + (m, m))
    if order == 2:
        return Jet2(value, grad, hess)
    third = np.zeros(shape + (m, m, m))
    return Jet2(value, grad, hess, third)


def jet_coordinate(points: np.ndarray, i: int, order: int = 2) -> Jet2:
    """Jet of the coordinate function x^i (0-based index i)."""
    points = np.asarray(points, dtype=float)
    m = points.shape[-1]
    shape = points.shape[:-1]
    value = points[..., i].copy()
    if order == 0:
        return Jet2(value)
    grad = np.zeros(shape + (m,))
    grad[..., i] = 1.0
    if order == 1:
        return Jet2(value, grad)
    hess = np.zeros(shape + (m, m))
    if order == 2:
        return Jet2(value, grad, hess)
    return Jet2(value, grad, hess, np.zeros(shape + (m, m, m)))


def jet_add(a: Jet2, b: Jet2) -> Jet2:
    order = min(a.order, b.order)
    return Jet2(
        a.value + b.value,
        a.gradient + b.gradient if order >= 1 else None,
        a.hessian + b.hessian if order >= 2 else None,
        a.third + b.third if order >= 3 else None,
    )


def jet_scale(a: Jet2, c: float) -> Jet2:
    return Jet2(
        c * a.value,
        c * a.gradient if a.gradient is not None else None,
        c * a.hessian if a.hessian is not None else None,
        c * a.third if a.third is not None else None,
    )


def jet_mul(a: Jet2, b: Jet2) -> Jet2:
    """Leibniz product of two jets, truncated at the lower order."""
    order = min(a.order, b.order)
    value = a.value * b.value
    if order == 0:
        return Jet2(value)
    av = a.value[..., None]
    bv = b.value[..., None]
    grad = av * b.gradient + bv * a.gradient
    if order == 1:
        return Jet2(value, grad)
    cross = (
        a.gradient[..., :, None] * b.gradient[..., None, :]
        + b.gradient[..., :, None] * a.gradient[..., None, :]
    )
    hess = av[..., None] * b.hessian + bv[..., None] * a.hessian + cross
    if order == 2:
        return Jet2(value, grad, hess)
    third = (
        av[..., None, None] * b.third
        + bv[..., None, None] * a.third
        + _sym3_outer(a.hessian, b.gradient)
        + _sym3_outer(b.hessian, a.gradient)
    )
    return Jet2(value, grad, hess, third)


def jet_compose_scalar(a: Jet2, derivs: Sequence[np.ndarray]) -> Jet2:
    """Jet of f(a) given the derivatives (f, f', f'', f''') of f at a.value."""
    order = min(a.order, len(derivs) - 1)
    value = derivs[0]
    if order == 0:
        return Jet2(np.asarray(value))
    g = a.gradient
    f1 = derivs[1][..., None]
    grad = f1 * g
    if order == 1:
        return Jet2(value, grad)
    gg = g[..., :, None] * g[..., None, :]
    f2 = derivs[2][..., None, None]
    hess = f2 * gg + f1[..., None] * a.hessian
    if order == 2:
        return Jet2(value, grad, hess)
    ggg = gg[..., :, :, None] * g[..., None, None, :]
    f3 = derivs[3][..., None, None, None]
    third = (
        f3 * ggg
        + f2[..., None] * _sym3_outer(a.hessian, g)
        + f1[..., None, None] * a.third
    )
    return Jet2(value, grad, hess, third)


def jet_power(a: Jet2, p: float) -> Jet2:
    """Jet of a**p; fractional p requires a strictly positive base."""
    t = np.asarray(a.value, dtype=float)
    if p != int(p) and np.any(t <= 0.0):
        raise DomainError("fractional power of a non-positive field value")
    derivs = [t ** p, p * t ** (p - 1.0)]
    if a.order >= 2:
        derivs.append(p * (p - 1.0) * t ** (p - 2.0))
    if a.order >= 3:
        derivs.append(p * (p - 1.0) * (p - 2.0) * t ** (p - 3.0))
    return jet_compose_scalar(a, derivs)


def jet_log(a: Jet2) -> Jet2:
    t = np.asarray(a.value, dtype=float)
    if np.any(t <= 0.0):
        raise DomainError("logarithm of a non-positive field value")
    derivs = [np.log(t), 1.0 / t]
    if a.order >= 2:
        derivs.append(-1.0 / t ** 2)
    if a.order >= 3:
        derivs.append(2.0 / t ** 3)
    return jet_compose_scalar(a, derivs)


def jet_exp(a: Jet2) -> Jet2:
    e = np.exp(np.asarray(a.value, dtype=float))
    return jet_compose_scalar(a, [e] * (a.order + 1))


def jet_compose_map(outer: Jet2, mp: MapJet) -> Jet2:
    """Jet of u(Phi(x)) given the jet of u at Phi(x) and derivatives of Phi."""
    order = outer.order
    if order >= 2 and mp.d2 is None:
        raise CapabilityError("map lacks second derivatives")
    if order >= 3 and mp.d3 is None:
        order = 2
    value = outer.value
    J = mp.jac
    grad = np.einsum("...k,...ki->...i", outer.gradient, J)
    if order == 1:
        return Jet2(value, grad)
    U = outer.hessian
    hess = np.einsum("...kl,...ki,...lj->...ij", U, J, J) + np.einsum(
        "...k,...kij->...ij", outer.gradient, mp.d2
    )
    if order == 2:
        return Jet2(value, grad, hess)
    third = np.einsum("...klp,...ki,...lj,...pq->...ijq", outer.third, J, J, J)
    third += np.einsum("...kl,...kij,...lq->...ijq", U, mp.d2, J)
    third += np.einsum("...kl,...kiq,...lj->...ijq", U, mp.d2, J)
    third += np.einsum("...kl,...kjq,...li->...ijq", U, mp.d2, J)
    third += np.einsum("...k,...kijq->...ijq", outer.gradient, mp.d3)
    return Jet2(value, grad, hess, third)


def _symmetric_sum(arrays: Sequence[np.ndarray]) -> np.ndarray:
    # Extended precision makes the reduction exact for small stacks, so the
    # result is bitwise independent of the order of the inputs.
    stacked = np.stack([np.asarray(a, dtype=np.longdouble) for a in arrays])
    return np.sum(stacked, axis=0).astype(np.float64)


def jet_linear_combination(jets: Sequence[Jet2], coeffs: Sequence[float]) -> Jet2:
    """Order-insensitive linear combination of jets.

    Used by polarization, where the result must be bitwise invariant under
    permutations of the inputs.
    """

    order = min(j.order for j in jets)
    parts = [[c * j.value for c, j in zip(coeffs, jets)]]
    if order >= 1:
        parts.append([c * j.gradient for c, j in zip(coeffs, jets)])
    if order >= 2:
        parts.append([c * j.hessian for c, j in zip(coeffs, jets)])
    if order >= 3:
        parts.append([c * j.third for c, j in zip(coeffs, jets)])
    summed = [_symmetric_sum(p) for p in parts]
    return Jet2(*summed, *([None] * (4 - len(summed))))


def boundary_decompose(points: np.ndarray, jet: Jet2, n: int) -> BoundaryJet:
    """Split an interior jet at |x| = 1 into its umbilic boundary pieces."""
    points = np.asarray(points, dtype=float)
    order = jet.order
    if order == 0:
        return BoundaryJet(points, jet.value)
    eta = np.einsum("...i,...i->...", jet.gradient, points)
    tang = jet.gradient - eta[..., None] * points
    if order == 1:
        return BoundaryJet(points, jet.value, eta, tang, None, jet.gradient)
    hess_nn = np.einsum("...ij,...i,...j->...", jet.hessian, points, points)
    tlap = jet.laplacian() - hess_nn - n * eta
    return BoundaryJet(
        points, jet.value, eta, tang, tlap, jet.gradient, jet.hessian
    )


def symmetric_sum_scalars(values: Sequence[np.ndarray]) -> np.ndarray:
    """Permutation-exact sum of a small stack of float arrays."""
    return _symmetric_sum(values)


def central_difference_jet(
    f: Callable[[np.ndarray], np.ndarray], point: np.ndarray, h: float = 1e-5
) -> Jet2:
    """Finite-difference jet used as an independent oracle in tests.

    Second-order central differences for both gradient and Hessian; the
    production path never calls this.
    """

    point = np.asarray(point, dtype=float)
    m = point.shape[-1]
    value = float(f(point))
    grad = np.zeros(m)
    hess = np.zeros((m, m))
    for i in range(m):
        ei = np.zeros(m)
        ei[i] = h
        grad[i] = (f(point + ei) - f(point - ei)) / (2 * h)
        hess[i, i] = (f(point + ei) - 2 * value + f(point - ei)) / h ** 2
        for j in range(i + 1, m):
            ej = np.zeros(m)
            ej[j] = h
            hess[i, j] = (
                f(point + ei + ej)
                - f(point + ei - ej)
                - f(point - ei + ej)
                + f(point - ei - ej)
            ) / (4 * h ** 2)
            hess[j, i] = hess[i, j]
    return Jet2(np.asarray(value), grad, hess)
