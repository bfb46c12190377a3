"""Pointwise curvature operators on the flat unit ball.

Two regimes share this module.  For boundary dimension n in {4, 5} the
operators are polynomial in the conformal factor u and its two-jet:
sigma_1, the Newton tensor T_1, the boundary operator H, the interior
cubic L_4 and boundary cubic B_3, their polarizations, and their
commutators with coordinate functions.  For n = 3 (ambient dimension
four) the conformal change is additive and the graded operators
L_{4,j} / B_{3,j} (j = 1, 2, 3) take their place.

Everything here is a pure function of jets; all functions accept batched
jets and return arrays with the same leading shape.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import CapabilityError, DomainError, ValidationError
from .jets import (
    BoundaryJet,
    Jet2,
    boundary_decompose,
    jet_coordinate,
    jet_linear_combination,
    jet_mul,
    symmetric_sum_scalars,
)

__all__ = [
    "sigma1_op",
    "t1_op",
    "h_op",
    "t1_eta_eta",
    "l4_cubic",
    "l4_divergence_form",
    "b3_cubic",
    "b3_cubic_expansion",
    "polarize3",
    "l4_trilinear",
    "b3_trilinear",
    "commutator_l4",
    "commutator_l4_direct",
    "commutator_b3",
    "commutator_b3_direct",
    "schouten_of_gu",
    "sigma2_geometric",
    "h2_geometric",
    "critical_t1",
    "critical_l4j",
    "critical_b3j",
    "l42_pointwise",
    "l43_pointwise",
    "b31_pointwise",
    "b32_pointwise",
    "b33_pointwise",
    "l2_op",
    "b1_op",
    "commutator_l2",
    "commutator_b1",
]


def _noncritical(n: int) -> int:
    if n not in (4, 5):
        raise ValidationError(f"operator defined for n in {{4, 5}}, got n={n}")
    return n


def _dim(n: int) -> int:
    if n not in (3, 4, 5):
        raise ValidationError(f"boundary dimension must be 3, 4 or 5, got {n}")
    return n


# -- scalar curvature operators ------------------------------------------


def sigma1_op(n: int, jet: Jet2) -> np.ndarray:
    """sigma_1 of the conformal metric, in polynomial (n >= 4) or additive
    (n = 3) normalization."""
    _dim(n)
    jet.require(2)
    lap = jet.laplacian()
    gsq = jet.grad_norm_sq()
    if n == 3:
        return -lap - gsq
    return -(n - 3) / 4.0 * jet.value * lap - (n + 1) / 4.0 * gsq


def t1_op(n: int, jet: Jet2) -> np.ndarray:
    """First Newton tensor of the conformal metric as a symmetric matrix."""
    _dim(n)
    jet.require(2)
    m = jet.m
    eye = np.eye(m)
    g = jet.gradient
    outer = g[..., :, None] * g[..., None, :]
    if n == 3:
        trace_part = jet.laplacian() + 0.5 * jet.grad_norm_sq()
        return jet.hessian - outer - trace_part[..., None, None] * eye
    scalar = sigma1_op(n, jet) + 0.5 * jet.grad_norm_sq()
    return (
        scalar[..., None, None] * eye
        + (n - 3) / 4.0 * jet.value[..., None, None] * jet.hessian
        - (n + 1) / 4.0 * outer
    )


def h_op(n: int, bjet: BoundaryJet) -> np.ndarray:
    """Conformal mean-curvature operator on the boundary sphere."""
    _dim(n)
    bjet.require(1)
    if n == 3:
        return bjet.normal_derivative + 1.0
    return bjet.normal_derivative + (n - 3) / 4.0 * bjet.value


def t1_eta_eta(n: int, bjet: BoundaryJet) -> np.ndarray:
    """Normal-normal component of T_1(u) expressed in boundary data."""
    bjet.require(2)
    eta = bjet.normal_derivative
    if n == 3:
        # hess(eta, eta) - (eta u)^2 - (lap + |grad|^2 / 2)
        hnn = np.einsum("...ij,...i,...j->...", bjet.hessian, bjet.point, bjet.point)
        gsq = bjet.tangential_grad_norm_sq() + eta ** 2
        return hnn - eta ** 2 - (bjet.laplacian() + 0.5 * gsq)
    _noncritical(n)
    u = bjet.value
    return (
        -(n - 3) / 4.0 * u * bjet.tangential_laplacian
        - (n - 1) / 4.0 * bjet.tangential_grad_norm_sq()
        - n / 2.0 * eta ** 2
        - n * (n - 3) / 4.0 * u * eta
    )


# -- interior and boundary cubics (n in {4, 5}) ---------------------------


def l4_cubic(n: int, jet: Jet2) -> np.ndarray:
    """Interior cubic operator on the diagonal, from the two-jet."""
    _noncritical(n)
    jet.require(2)
    u = jet.value
    lap = jet.laplacian()
    gsq = jet.grad_norm_sq()
    hess_sq = np.einsum("...ij,...ij->...", jet.hessian, jet.hessian)
    hess_gg = np.einsum("...ij,...i,...j->...", jet.hessian, jet.gradient, jet.gradient)
    return (
        (n - 3) / 8.0 * u * lap ** 2
        - (n - 3) / 8.0 * u * hess_sq
        + (n - 1) / 4.0 * gsq * lap
        + (n + 1) / 4.0 * hess_gg
    )


def l4_divergence_form(n: int, jet: Jet2) -> np.ndarray:
    """Divergence form of the interior cubic; needs exact third derivatives.

    (1/2) div(|grad u|^2 grad u) - ((n-3)/16) [u lap |grad u|^2
    - div((lap u^2) grad u)].  Agrees pointwise with `l4_cubic`; kept as an
    independent route for the equivalence check.
    """

    _noncritical(n)
    if jet.third is None:
        raise CapabilityError("divergence form requires an order-3 jet")
    g = jet.gradient
    hess = jet.hessian
    lap = jet.laplacian()
    gsq = jet.grad_norm_sq()
    grad_lap = np.einsum("...kki->...i", jet.third)
    hess_sq = np.einsum("...ij,...ij->...", hess, hess)
    hess_gg = np.einsum("...ij,...i,...j->...", hess, g, g)
    # div(|grad u|^2 du) = |grad u|^2 lap + 2 hess(g, g)
    term1 = 0.5 * (gsq * lap + 2.0 * hess_gg)
    # lap |grad u|^2 = 2 |hess|^2 + 2 <grad lap, grad>
    lap_gsq = 2.0 * hess_sq + 2.0 * np.einsum("...i,...i->...", grad_lap, g)
    # lap u^2 = 2 u lap + 2 |grad|^2, so
    # div((lap u^2) du) = <grad(lap u^2), grad> + (lap u^2) lap
    grad_lap_u2 = 2.0 * (
        jet.value[..., None] * grad_lap
        + lap[..., None] * g
        + 2.0 * np.einsum("...ij,...j->...i", hess, g)
    )
    div_term = np.einsum("...i,...i->...", grad_lap_u2, g) + (
        2.0 * jet.value * lap + 2.0 * gsq
    ) * lap
    return term1 - (n - 3) / 16.0 * (jet.value * lap_gsq - div_term)


def b3_cubic(n: int, bjet: BoundaryJet) -> np.ndarray:
    """Boundary cubic on the diagonal: H(u) T_1(u)(eta, eta) + (n/3) H(u)^3."""
    _noncritical(n)
    h = h_op(n, bjet)
    return h * t1_eta_eta(n, bjet) + n / 3.0 * h ** 3


def b3_cubic_expansion(n: int, bjet: BoundaryJet) -> np.ndarray:
    """Boundary cubic through its explicit expansion (cross-check route)."""
    _noncritical(n)
    bjet.require(2)
    u = bjet.value
    eta = bjet.normal_derivative
    h = eta + (n - 3) / 4.0 * u
    return -n / 6.0 * h ** 3 + h * (
        -(n - 3) / 4.0 * u * bjet.tangential_laplacian
        - (n - 1) / 4.0 * bjet.tangential_grad_norm_sq()
        + n * (n - 3) ** 2 / 32.0 * u ** 2
    )


# -- polarization ----------------------------------------------------------


def _combine_boundary(jets, coeffs):
    pts = jets[0].point
    fields = {"value": [], "normal_derivative": [], "tangential_gradient": [],
              "tangential_laplacian": [], "gradient": [], "hessian": []}
    for c, j in zip(coeffs, jets):
        for name in fields:
            arr = getattr(j, name)
            fields[name].append(c * arr if arr is not None else None)
    out = {}
    for name, parts in fields.items():
        out[name] = None if parts[0] is None else symmetric_sum_scalars(parts)
    return BoundaryJet(pts, **out)


def _combine(jets, coeffs):
    if isinstance(jets[0], BoundaryJet):
        return _combine_boundary(jets, coeffs)
    return jet_linear_combination(jets, coeffs)


def polarize3(cubic: Callable, a, b, c) -> np.ndarray:
    """Fully symmetric trilinear form of a homogeneous cubic operator.

    Inclusion-exclusion over jet sums; the reductions are permutation-exact,
    so any argument order returns bitwise identical values.
    """

    q_abc = cubic(_combine([a, b, c], [1.0, 1.0, 1.0]))
    q_ab = cubic(_combine([a, b], [1.0, 1.0]))
    q_ac = cubic(_combine([a, c], [1.0, 1.0]))
    q_bc = cubic(_combine([b, c], [1.0, 1.0]))
    singles = symmetric_sum_scalars([cubic(a), cubic(b), cubic(c)])
    pairs = symmetric_sum_scalars([q_ab, q_ac, q_bc])
    return (q_abc - pairs + singles) / 6.0


def l4_trilinear(n: int, a: Jet2, b: Jet2, c: Jet2) -> np.ndarray:
    return polarize3(lambda j: l4_cubic(n, j), a, b, c)


def b3_trilinear(n: int, a: BoundaryJet, b: BoundaryJet, c: BoundaryJet) -> np.ndarray:
    return polarize3(lambda j: b3_cubic(n, j), a, b, c)


def jet_times_coordinate(jet: Jet2, points: np.ndarray, i: int) -> Jet2:
    """Jet of x^i * u from the jet of u."""
    order = min(jet.order, 3)
    return jet_mul(jet, jet_coordinate(points, i, order))


def boundary_jet_times_coordinate(bjet: BoundaryJet, i: int, n: int) -> BoundaryJet:
    """Boundary jet of x^i * u from the boundary jet of u."""
    bjet.require(2)
    full = Jet2(bjet.value, bjet.gradient, bjet.hessian)
    prod = jet_mul(full, jet_coordinate(bjet.point, i, 2))
    return boundary_decompose(bjet.point, prod, n)


# -- commutators with coordinate multiplication ---------------------------


def commutator_l4(n: int, jet: Jet2, i: int) -> np.ndarray:
    """[L_4, x^i] on the diagonal, closed form:
    (8 / (3(n-3))) (T_1(grad u, e_i) - (n/2) sigma_1 d_i u)."""
    _noncritical(n)
    t1 = t1_op(n, jet)
    t1_grad_ei = np.einsum("...kj,...k->...j", t1, jet.gradient)[..., i]
    s1 = sigma1_op(n, jet)
    return 8.0 / (3.0 * (n - 3)) * (t1_grad_ei - n / 2.0 * s1 * jet.gradient[..., i])


def commutator_l4_direct(n: int, jet: Jet2, points: np.ndarray, i: int) -> np.ndarray:
    """[L_4, x^i] from the definition L_4(x^i u, u, u) - x^i L_4(u, u, u)."""
    xi_u = jet_times_coordinate(jet, points, i)
    tri = l4_trilinear(n, xi_u, jet, jet)
    return tri - np.asarray(points)[..., i] * l4_cubic(n, jet)


def commutator_b3(n: int, bjet: BoundaryJet, i: int) -> np.ndarray:
    """[B_3, x^i] on the diagonal, closed form."""
    _noncritical(n)
    u = bjet.value
    x_i = bjet.point[..., i]
    h = h_op(n, bjet)
    tangential_xi = -x_i[..., None] * bjet.point
    tangential_xi = tangential_xi + 0.0
    tangential_xi[..., i] += 1.0
    inner = np.einsum("...j,...j->...", bjet.tangential_gradient, tangential_xi)
    return (
        x_i * u / 3.0 * (t1_eta_eta(n, bjet) + n * (n - 3) / 4.0 * u * h)
        - (n - 2) / 3.0 * u * h * inner
    )


def commutator_b3_direct(n: int, bjet: BoundaryJet, i: int) -> np.ndarray:
    """[B_3, x^i] from the polarized definition."""
    xi_u = boundary_jet_times_coordinate(bjet, i, n)
    tri = b3_trilinear(n, xi_u, bjet, bjet)
    return tri - bjet.point[..., i] * b3_cubic(n, bjet)


# -- geometric quantities of the conformal metric -------------------------


def schouten_of_gu(n: int, jet: Jet2) -> np.ndarray:
    """Schouten tensor of g_u = u^{8/(n-3)} dx^2 in Euclidean components."""
    _noncritical(n)
    jet.require(2)
    u = jet.value
    if np.any(u <= 0.0):
        raise DomainError("conformal factor must be positive")
    m = jet.m
    g = jet.gradient
    outer = g[..., :, None] * g[..., None, :]
    uinv = 1.0 / u
    return (
        -4.0 / (n - 3) * uinv[..., None, None] * jet.hessian
        + 4.0 * (n + 1) / (n - 3) ** 2 * (uinv ** 2)[..., None, None] * outer
        - 8.0 / (n - 3) ** 2 * (uinv ** 2 * jet.grad_norm_sq())[..., None, None]
        * np.eye(m)
    )


def sigma2_geometric(n: int, jet: Jet2) -> np.ndarray:
    """sigma_2 of g_u via the elementary-symmetric identity
    sigma_2 = ((tr P)^2 - tr(P^2)) / 2, with the metric trace factors."""
    P = schouten_of_gu(n, jet)
    tr = np.trace(P, axis1=-2, axis2=-1)
    tr2 = np.einsum("...ij,...ji->...", P, P)
    return jet.value ** (-16.0 / (n - 3)) * 0.5 * (tr ** 2 - tr2)


def h2_geometric(n: int, bjet: BoundaryJet) -> np.ndarray:
    """H_2 of g_u on the boundary: H tr P|_{TM} + (n/3) H^3 for g_u."""
    _noncritical(n)
    bjet.require(2)
    u = bjet.value
    if np.any(u <= 0.0):
        raise DomainError("conformal factor must be positive")
    full = Jet2(bjet.value, bjet.gradient, bjet.hessian)
    P = schouten_of_gu(n, full)
    p_nn = np.einsum("...ij,...i,...j->...", P, bjet.point, bjet.point)
    tr_tm = (np.trace(P, axis1=-2, axis2=-1) - p_nn) * u ** (-8.0 / (n - 3))
    h_gu = 4.0 / (n - 3) * u ** (-(n + 1.0) / (n - 3)) * h_op(n, bjet)
    return h_gu * tr_tm + n / 3.0 * h_gu ** 3


# -- critical-dimension graded operators (n = 3) --------------------------


def critical_t1(jet: Jet2) -> np.ndarray:
    """Newton tensor in the additive normalization on the four-ball."""
    return t1_op(3, jet)


def l43_pointwise(ju: Jet2, jv: Jet2, jw: Jet2) -> np.ndarray:
    """L_{4,3}(u, v, w): trilinear, two-jets suffice after expanding the
    divergence."""
    gu, gv, gw = ju.gradient, jv.gradient, jw.gradient
    out = 2.0 * (
        np.einsum("...ij,...i,...j->...", ju.hessian, gv, gw)
        + np.einsum("...ij,...i,...j->...", jv.hessian, gu, gw)
        + np.einsum("...ij,...i,...j->...", jw.hessian, gu, gv)
    )
    out += np.einsum("...i,...i->...", gu, gv) * jw.laplacian()
    out += np.einsum("...i,...i->...", gu, gw) * jv.laplacian()
    out += np.einsum("...i,...i->...", gv, gw) * ju.laplacian()
    return out


def l42_pointwise(ju: Jet2, jv: Jet2) -> np.ndarray:
    """L_{4,2}(u, v) = lap u lap v - <hess u, hess v> (reduced form)."""
    return ju.laplacian() * jv.laplacian() - np.einsum(
        "...ij,...ij->...", ju.hessian, jv.hessian
    )


def l42_strong(ju: Jet2, jv: Jet2) -> np.ndarray:
    """Literal form -(1/2)(lap <grad u, grad v> - div((lap u) dv + (lap v) du)).

    Keeps the third-derivative terms separate instead of cancelling them
    symbolically, so it genuinely consumes order-3 jets.
    """

    if ju.third is None or jv.third is None:
        raise CapabilityError("strong form of L_{4,2} requires order-3 jets")
    gu, gv = ju.gradient, jv.gradient
    grad_lap_u = np.einsum("...kki->...i", ju.third)
    grad_lap_v = np.einsum("...kki->...i", jv.third)
    lap_inner = (
        np.einsum("...i,...i->...", grad_lap_u, gv)
        + 2.0 * np.einsum("...ij,...ij->...", ju.hessian, jv.hessian)
        + np.einsum("...i,...i->...", grad_lap_v, gu)
    )
    div_part = (
        np.einsum("...i,...i->...", grad_lap_u, gv)
        + 2.0 * ju.laplacian() * jv.laplacian()
        + np.einsum("...i,...i->...", grad_lap_v, gu)
    )
    return -0.5 * (lap_inner - div_part)


def b33_pointwise(bu: BoundaryJet, bv: BoundaryJet, bw: BoundaryJet) -> np.ndarray:
    """B_{3,3}(u, v, w) = -(<grad u, grad v> eta w + cyclic), full gradients."""
    gu, gv, gw = bu.gradient, bv.gradient, bw.gradient
    return -(
        np.einsum("...i,...i->...", gu, gv) * bw.normal_derivative
        + np.einsum("...i,...i->...", gu, gw) * bv.normal_derivative
        + np.einsum("...i,...i->...", gv, gw) * bu.normal_derivative
    )


def b32_pointwise(bu: BoundaryJet, bv: BoundaryJet) -> np.ndarray:
    """B_{3,2}(u, v) on the unit sphere (H = 1)."""
    return (
        -(bu.tangential_laplacian * bv.normal_derivative
          + bv.tangential_laplacian * bu.normal_derivative)
        - np.einsum(
            "...i,...i->...", bu.tangential_gradient, bv.tangential_gradient
        )
        - 3.0 * bu.normal_derivative * bv.normal_derivative
    )


def b31_pointwise(bu: BoundaryJet) -> np.ndarray:
    """B_{3,1}(u) on the flat ball: the background Newton tensor vanishes
    and H = 1, leaving -lap_tangential u."""
    return -bu.tangential_laplacian


def critical_l4j(j: int, *jets: Jet2) -> np.ndarray:
    """Graded interior operators on the flat four-ball, strong form."""
    if j == 1:
        (ju,) = jets
        return np.zeros_like(np.asarray(ju.value))
    if j == 2:
        return l42_strong(*jets)
    if j == 3:
        return l43_pointwise(*jets)
    raise ValidationError("j must be 1, 2 or 3")


def critical_b3j(j: int, *bjets: BoundaryJet) -> np.ndarray:
    """Graded boundary operators on the unit three-sphere."""
    if j == 1:
        return b31_pointwise(*bjets)
    if j == 2:
        return b32_pointwise(*bjets)
    if j == 3:
        return b33_pointwise(*bjets)
    raise ValidationError("j must be 1, 2 or 3")


# -- conformal Laplacian / Robin operator (k = 1 machinery) ----------------


def l2_op(jet: Jet2) -> np.ndarray:
    """Conformal Laplacian of the flat metric: -lap u."""
    return -jet.laplacian()


def b1_op(n: int, bjet: BoundaryJet) -> np.ndarray:
    """Conformal Robin operator: eta u + ((n-1)/2) u."""
    return bjet.normal_derivative + (n - 1) / 2.0 * bjet.value


def commutator_l2(jet: Jet2, i: int) -> np.ndarray:
    """[L_2, x^i] u = -2 d_i u."""
    return -2.0 * jet.gradient[..., i]


def commutator_b1(bjet: BoundaryJet, i: int) -> np.ndarray:
    """[B_1, x^i] u = x^i u."""
    return bjet.point[..., i] * bjet.value
