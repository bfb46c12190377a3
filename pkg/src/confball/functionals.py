"""Integral energies and variational quantities on the unit ball.

The quartic trace energy is evaluated through several algebraically
equivalent routes (the raw pairing with the interior/boundary cubics and
four integrated-by-parts rewritings, plus a geometric route through the
Schouten tensor when the factor is positive).  Their mutual agreement at
quadrature tolerance is itself one of the package's main correctness
checks, so the routes deliberately share nothing beyond the jet evaluation.

Dimension conventions: n in {4, 5} uses the multiplicative normalization
u^{8/(n-3)} dx^2 with boundary volume element u^{4n/(n-3)}; n = 3 uses the
additive normalization e^{2u} dx^2 with boundary element e^{3u}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from . import operators as ops
from .errors import DomainError, PreconditionError, ValidationError
from .fields import (
    AffineField,
    PolynomialField,
    ScalarField,
    boundary_sample_grid,
    interior_sample_grid,
)
from .jets import Jet2, jet_mul
from .quadrature import RuleSet, integrate_many, sphere_volume

__all__ = [
    "EnergyReport",
    "e1",
    "e2",
    "e2_report",
    "E2_FORMULAS",
    "sharp_constant_conjecture",
    "f2",
    "f2_lemma_form",
    "f2_background",
    "g2",
    "boundary_volume",
    "normalize",
    "second_variation_e2",
    "second_variation_g2",
    "first_variation_e2",
    "first_variation_g2",
    "euler_residual",
    "stability_expression",
    "flat_e2_value",
]

E2_FORMULAS = ("direct", "pregeometric", "geometric", "positive", "alternate")


@dataclass(frozen=True)
class EnergyReport:
    """Values of one energy through all requested formulas."""

    values: Dict[str, float]
    discrepancy: float
    quadrature_degree: int

    def to_dict(self) -> dict:
        return {
            "values": dict(self.values),
            "max_discrepancy": self.discrepancy,
            "quadrature_degree": self.quadrature_degree,
        }


def _full_jet(bjet) -> Jet2:
    return Jet2(bjet.value, bjet.gradient, bjet.hessian)


def e1(field: ScalarField, n: int, rules: Optional[RuleSet] = None) -> float:
    """Quadratic trace energy: int |grad u|^2 + ((n-1)/2) oint u^2."""
    rules = rules or RuleSet.default(n)
    (grad_sq,) = integrate_many(
        rules.interior, lambda p: (field.jets(p, order=1).grad_norm_sq(),)
    )
    (usq,) = integrate_many(rules.boundary, lambda p: (field.values(p) ** 2,))
    return grad_sq + (n - 1) / 2.0 * usq


def flat_e2_value(n: int) -> float:
    """Closed-form quartic energy of the unit constant: omega_n (n/3) ((n-3)/4)^3."""
    return sphere_volume(n) * n / 3.0 * ((n - 3) / 4.0) ** 3


def _e2_interior_integrands(n, jets, wanted):
    s1 = ops.sigma1_op(n, jets)
    gsq = jets.grad_norm_sq()
    out = {}
    if "direct" in wanted:
        out["direct"] = jets.value * ops.l4_cubic(n, jets)
    if {"pregeometric", "geometric", "positive"} & wanted:
        common = (s1 + 0.5 * gsq) * gsq
        for name in ("pregeometric", "geometric", "positive"):
            if name in wanted:
                out[name] = common
    if "alternate" in wanted:
        t1 = ops.t1_op(n, jets)
        t1_gg = np.einsum("...ij,...i,...j->...", t1, jets.gradient, jets.gradient)
        out["alternate"] = 2.0 / 3.0 * t1_gg + n / 6.0 * gsq ** 2
    if "schouten" in wanted:
        sigma2 = ops.sigma2_geometric(n, jets)
        out["schouten"] = (
            ((n - 3) / 4.0) ** 3
            * sigma2
            * jets.value ** (4.0 * (n + 1) / (n - 3))
        )
    return out


def _e2_boundary_integrands(n, bjets, wanted):
    u = bjets.value
    eta = bjets.normal_derivative
    tg2 = bjets.tangential_grad_norm_sq()
    h = ops.h_op(n, bjets)
    t1nn = ops.t1_eta_eta(n, bjets)
    c = (n - 3) / 4.0
    out = {}
    if "direct" in wanted:
        out["direct"] = u * ops.b3_cubic(n, bjets)
    if "pregeometric" in wanted:
        t1 = ops.t1_op(n, _full_jet(bjets))
        t1_grad_eta = np.einsum(
            "...ij,...i,...j->...", t1, bjets.gradient, bjets.point
        )
        full_g2 = tg2 + eta ** 2
        out["pregeometric"] = (
            u * h * t1nn
            - 0.5 * u * t1_grad_eta
            - 0.25 * u * full_g2 * eta
            + n / 3.0 * u * h ** 3
        )
    if "geometric" in wanted:
        out["geometric"] = (
            c * u ** 2 * t1nn
            + c * u * h * tg2
            - (n - 3) * (n - 5) / 16.0 * u ** 2 * tg2
            + (n - 3) / 12.0 * u * eta ** 3
            + n * (n - 3) / 8.0 * u ** 2 * eta ** 2
            + n * (n - 3) ** 2 / 16.0 * u ** 3 * eta
            + n / 3.0 * c ** 3 * u ** 4
        )
    if "positive" in wanted:
        out["positive"] = (
            c * u * h * tg2
            + c ** 2 * u ** 2 * tg2
            + (n - 3) / 12.0 * u * eta ** 3
            + n / 3.0 * c ** 3 * u ** 4
        )
    if "alternate" in wanted:
        out["alternate"] = (
            (n - 3) / 6.0 * u * h * tg2
            + 4.0 / 3.0 * c ** 2 * u ** 2 * tg2
            + n / 3.0 * c ** 3 * u ** 4
        )
    if "schouten" in wanted:
        h2 = ops.h2_geometric(n, bjets)
        out["schouten"] = (
            ((n - 3) / 4.0) ** 3 * h2 * u ** (4.0 * n / (n - 3))
        )
    return out


def e2_report(
    field: ScalarField,
    n: int,
    rules: Optional[RuleSet] = None,
    formulas: Sequence[str] = E2_FORMULAS,
) -> EnergyReport:
    """Quartic trace energy through every requested formula.

    The jets are evaluated once per rule; each formula only reassembles
    them, so requesting all five (plus "schouten" for positive fields)
    costs barely more than one.
    """

    if n not in (4, 5):
        raise ValidationError("the quartic trace energy requires n in {4, 5}")
    rules = rules or RuleSet.default(n)
    wanted = set(formulas)
    unknown = wanted - set(E2_FORMULAS) - {"schouten"}
    if unknown:
        raise ValidationError(f"unknown energy formulas: {sorted(unknown)}")
    names = [f for f in list(E2_FORMULAS) + ["schouten"] if f in wanted]

    def interior(pts):
        vals = _e2_interior_integrands(n, field.jets(pts, order=2), wanted)
        return tuple(vals[name] for name in names)

    def boundary(pts):
        vals = _e2_boundary_integrands(n, field.boundary_jets(pts, order=2), wanted)
        return tuple(vals[name] for name in names)

    ivals = integrate_many(rules.interior, interior)
    bvals = integrate_many(rules.boundary, boundary)
    values = {name: ivals[k] + bvals[k] for k, name in enumerate(names)}
    vlist = list(values.values())
    disc = max(abs(a - b) for a in vlist for b in vlist) if len(vlist) > 1 else 0.0
    return EnergyReport(values, disc, rules.degree)


def e2(field: ScalarField, n: int, rules: Optional[RuleSet] = None) -> float:
    """Quartic trace energy through the direct pairing with the cubics."""
    return e2_report(field, n, rules, formulas=("direct",)).values["direct"]


def sharp_constant_conjecture(n: int, k: int = 2, boundary_volume: float = None) -> float:
    """Conjectured sharp constant n! / ((n+1-k)! (2k-1)!!) omega_n^{(2k-1)/n}
    V^{(n+1-2k)/n} at the given boundary volume."""
    if boundary_volume is None:
        boundary_volume = sphere_volume(n)
    double_fact = 1
    for j in range(2 * k - 1, 0, -2):
        double_fact *= j
    coeff = math.factorial(n) / (math.factorial(n + 1 - k) * double_fact)
    return (
        coeff
        * sphere_volume(n) ** ((2 * k - 1) / n)
        * boundary_volume ** ((n + 1 - 2 * k) / n)
    )


# -- critical-dimension functionals (n = 3) --------------------------------


def f2(field: ScalarField, rules: Optional[RuleSet] = None) -> float:
    """Conformal primitive of the critical curvature pair, weak form:
    -(1/4) int [ |grad u|^4 / 2 + |grad u|^2 lap u ]
    + oint [ |tgrad u|^2 eta u / 4 + (eta u)^3 / 12 + |tgrad u|^2 / 2 + u ].
    """

    rules = rules or RuleSet.default(3)

    def interior(pts):
        j = field.jets(pts, order=2)
        gsq = j.grad_norm_sq()
        return (-0.25 * (0.5 * gsq ** 2 + gsq * j.laplacian()),)

    def boundary(pts):
        b = field.boundary_jets(pts, order=2)
        tg2 = b.tangential_grad_norm_sq()
        eta = b.normal_derivative
        return (0.25 * tg2 * eta + eta ** 3 / 12.0 + 0.5 * tg2 + b.value,)

    return integrate_many(rules.interior, interior)[0] + integrate_many(
        rules.boundary, boundary
    )[0]


def f2_lemma_form(field: ScalarField, rules: Optional[RuleSet] = None) -> float:
    """Same functional assembled from the graded operators pointwise:
    int u [ L_{4,3}(u,u,u)/24 + L_{4,2}(u,u)/6 ]
    + oint u [ B_{3,3}(u,u,u)/24 + B_{3,2}(u,u)/6 + B_{3,1}(u)/2 + 1 ].

    The interior integrand differs pointwise from the weak form by a
    divergence, so agreement of the two routes after quadrature is a real
    integration-by-parts check.
    """

    rules = rules or RuleSet.default(3)

    def interior(pts):
        j = field.jets(pts, order=2)
        val = ops.l43_pointwise(j, j, j) / 24.0 + ops.l42_pointwise(j, j) / 6.0
        return (j.value * val,)

    def boundary(pts):
        b = field.boundary_jets(pts, order=2)
        val = (
            ops.b33_pointwise(b, b, b) / 24.0
            + ops.b32_pointwise(b, b) / 6.0
            + ops.b31_pointwise(b) / 2.0
            + 1.0
        )
        return (b.value * val,)

    return integrate_many(rules.interior, interior)[0] + integrate_many(
        rules.boundary, boundary
    )[0]


def f2_background(
    field_u: ScalarField, field_v: ScalarField, rules: Optional[RuleSet] = None
) -> float:
    """The critical primitive of u relative to the background e^{2v} dx^2.

    Evaluated entirely through flat-ball operators by expanding the
    conformally transformed operators in powers of v; this is the second
    term of the cocycle identity F2(u + v) = F2(v) + F2^{e^{2v}}(u).
    """

    rules = rules or RuleSet.default(3)

    def interior(pts):
        ju = field_u.jets(pts, order=2)
        jv = field_v.jets(pts, order=2)
        l3 = ops.l43_pointwise
        l2 = ops.l42_pointwise
        val = (
            l3(ju, ju, ju) / 24.0
            + (l2(ju, ju) + l3(ju, ju, jv)) / 6.0
            + 0.5 * (l2(ju, jv) + 0.5 * l3(ju, jv, jv))
            + 0.5 * l2(jv, jv)
            + l3(jv, jv, jv) / 6.0
        )
        return (ju.value * val,)

    def boundary(pts):
        bu = field_u.boundary_jets(pts, order=2)
        bv = field_v.boundary_jets(pts, order=2)
        b3, b2, b1 = ops.b33_pointwise, ops.b32_pointwise, ops.b31_pointwise
        val = (
            b3(bu, bu, bu) / 24.0
            + (b2(bu, bu) + b3(bu, bu, bv)) / 6.0
            + 0.5 * (b1(bu) + b2(bu, bv) + 0.5 * b3(bu, bv, bv))
            + (1.0 + b1(bv) + 0.5 * b2(bv, bv) + b3(bv, bv, bv) / 6.0)
        )
        return (bu.value * val,)

    return integrate_many(rules.interior, interior)[0] + integrate_many(
        rules.boundary, boundary
    )[0]


def g2(field: ScalarField, rules: Optional[RuleSet] = None) -> float:
    """Scale-invariant critical energy: F2(u) - (omega_3/3) log of the
    normalized boundary volume of e^{2u} dx^2."""
    rules = rules or RuleSet.default(3)
    vol = boundary_volume(field, 3, rules)
    w3 = sphere_volume(3)
    return f2(field, rules) - w3 / 3.0 * math.log(vol / w3)


# -- volume normalization ---------------------------------------------------


def boundary_volume(field: ScalarField, n: int, rules: Optional[RuleSet] = None) -> float:
    """Boundary volume of the conformal metric: oint u^{4n/(n-3)} for
    n in {4, 5}, oint e^{3u} for n = 3."""
    rules = rules or RuleSet.default(n)
    if n == 3:
        return integrate_many(
            rules.boundary, lambda p: (np.exp(3.0 * field.values(p)),)
        )[0]

    def integrand(pts):
        vals = field.values(pts)
        if np.any(vals <= 0.0):
            raise DomainError("boundary volume requires u > 0 on the sphere")
        return (vals ** (4.0 * n / (n - 3.0)),)

    return integrate_many(rules.boundary, integrand)[0]


def normalize(field: ScalarField, n: int, rules: Optional[RuleSet] = None) -> ScalarField:
    """Rescale (n in {4,5}) or shift (n = 3) so the boundary volume equals
    omega_n exactly at quadrature level."""
    rules = rules or RuleSet.default(n)
    vol = boundary_volume(field, n, rules)
    w = sphere_volume(n)
    if n == 3:
        shift = -math.log(vol / w) / 3.0
        if isinstance(field, PolynomialField):
            return field.shifted(shift)
        return AffineField(field, 1.0, shift)
    scale = (w / vol) ** ((n - 3.0) / (4.0 * n))
    if isinstance(field, PolynomialField):
        return field.scaled(scale)
    return AffineField(field, scale, 0.0)


# -- variations -------------------------------------------------------------


def first_variation_e2(
    u: ScalarField, v: ScalarField, n: int, rules: Optional[RuleSet] = None
) -> float:
    """d/dt E2(u + t v) at t = 0, via the formally self-adjoint pairing:
    4 [ int v L4(u,u,u) + oint v B3(u,u,u) ]."""
    rules = rules or RuleSet.default(n)
    (ival,) = integrate_many(
        rules.interior,
        lambda p: (v.values(p) * ops.l4_cubic(n, u.jets(p, order=2)),),
    )
    (bval,) = integrate_many(
        rules.boundary,
        lambda p: (v.values(p) * ops.b3_cubic(n, u.boundary_jets(p, order=2)),),
    )
    return 4.0 * (ival + bval)


def second_variation_e2(
    u: ScalarField,
    v: ScalarField,
    n: int,
    rules: Optional[RuleSet] = None,
    constraint_tol: float = 1e-8,
) -> float:
    """Second-variation defect at a volume-normalized factor u.

    Returns
        int uv L4(uv, u, u) + oint uv B3(uv, u, u)
        - ((n+1)/(n-3)) omega_n^{-1} E2(u) oint v^2 u^{4n/(n-3)},
    which is nonnegative (up to tolerance) at local minimizers, for
    directions v with oint v u^{4n/(n-3)} = 0.
    """

    if n not in (4, 5):
        raise ValidationError("second_variation_e2 requires n in {4, 5}")
    rules = rules or RuleSet.default(n)
    exponent = 4.0 * n / (n - 3.0)

    def b_moments(pts):
        uvals = u.values(pts)
        if np.any(uvals <= 0.0):
            raise DomainError("u must be positive on the boundary")
        vvals = v.values(pts)
        dens = uvals ** exponent
        return dens, vvals * dens, vvals ** 2 * dens

    mass, v_mom, v2_mom = integrate_many(rules.boundary, b_moments)
    if abs(v_mom) > constraint_tol * mass:
        raise PreconditionError(
            f"direction violates the tangency constraint: "
            f"|oint v u^{{4n/(n-3)}}| = {abs(v_mom):.3e} > {constraint_tol:.1e} * mass"
        )

    def interior(pts):
        ju = u.jets(pts, order=2)
        juv = jet_mul(ju, v.jets(pts, order=2))
        return (juv.value * ops.l4_trilinear(n, juv, ju, ju),)

    def boundary(pts):
        bu = u.boundary_jets(pts, order=2)
        bv = v.boundary_jets(pts, order=2)
        from .jets import boundary_decompose

        buv = boundary_decompose(
            bu.point, jet_mul(_full_jet(bu), _full_jet(bv)), n
        )
        return (buv.value * ops.b3_trilinear(n, buv, bu, bu),)

    lhs = integrate_many(rules.interior, interior)[0] + integrate_many(
        rules.boundary, boundary
    )[0]
    energy = e2(u, n, rules)
    rhs = (n + 1.0) / (n - 3.0) / sphere_volume(n) * energy * v2_mom
    return lhs - rhs


def first_variation_g2(
    u: ScalarField, v: ScalarField, rules: Optional[RuleSet] = None
) -> float:
    """d/dt G2(u + t v) at t = 0 through the graded pairings."""
    rules = rules or RuleSet.default(3)

    def interior(pts):
        ju = u.jets(pts, order=2)
        jv = v.jets(pts, order=2)
        return (
            jv.value * (ops.l43_pointwise(ju, ju, ju) / 6.0
                        + 0.5 * ops.l42_pointwise(ju, ju)),
        )

    def boundary(pts):
        bu = u.boundary_jets(pts, order=2)
        bv = v.boundary_jets(pts, order=2)
        dens = np.exp(3.0 * bu.value)
        pairing = bv.value * (
            ops.b33_pointwise(bu, bu, bu) / 6.0
            + 0.5 * ops.b32_pointwise(bu, bu)
            + ops.b31_pointwise(bu)
            + 1.0
        )
        return pairing, dens, bv.value * dens

    ival = integrate_many(rules.interior, interior)[0]
    bval, mass, v_mom = integrate_many(rules.boundary, boundary)
    return ival + bval - sphere_volume(3) * v_mom / mass


def second_variation_g2(
    u: ScalarField,
    v: ScalarField,
    rules: Optional[RuleSet] = None,
    constraint_tol: float = 1e-8,
) -> float:
    """Second-variation defect of the scale-invariant critical energy.

    Returns the operator quadratic form minus 3 omega_3 oint v^2 e^{3u} /
    oint e^{3u}; nonnegative (up to tolerance) at local minimizers, for
    directions with oint v e^{3u} = 0.
    """

    rules = rules or RuleSet.default(3)

    def b_moments(pts):
        dens = np.exp(3.0 * u.values(pts))
        vvals = v.values(pts)
        return dens, vvals * dens, vvals ** 2 * dens

    mass, v_mom, v2_mom = integrate_many(rules.boundary, b_moments)
    if abs(v_mom) > constraint_tol * mass:
        raise PreconditionError(
            f"direction violates the tangency constraint: "
            f"|oint v e^{{3u}}| = {abs(v_mom):.3e} > {constraint_tol:.1e} * mass"
        )

    def interior(pts):
        ju = u.jets(pts, order=2)
        jv = v.jets(pts, order=2)
        return (
            jv.value * (0.5 * ops.l43_pointwise(jv, ju, ju)
                        + ops.l42_pointwise(jv, ju)),
        )

    def boundary(pts):
        bu = u.boundary_jets(pts, order=2)
        bv = v.boundary_jets(pts, order=2)
        return (
            bv.value * (0.5 * ops.b33_pointwise(bv, bu, bu)
                        + ops.b32_pointwise(bv, bu)
                        + ops.b31_pointwise(bv)),
        )

    quad_form = integrate_many(rules.interior, interior)[0] + integrate_many(
        rules.boundary, boundary
    )[0]
    lhs = 3.0 * sphere_volume(3) * v2_mom / mass
    return quad_form - lhs


def euler_residual(
    u: ScalarField,
    n: int,
    rules: Optional[RuleSet] = None,
    interior_grid: Optional[np.ndarray] = None,
    boundary_grid: Optional[np.ndarray] = None,
) -> tuple:
    """Sup-norm residuals of the stationarity system over sample grids:
    L4(u,u,u) = 0 in the ball and B3(u,u,u) = omega_n^{-1} E2(u)
    u^{3(n+1)/(n-3)} on the sphere."""
    if n not in (4, 5):
        raise ValidationError("euler_residual requires n in {4, 5}")
    rules = rules or RuleSet.default(n)
    ipts = interior_grid if interior_grid is not None else interior_sample_grid(n)
    bpts = boundary_grid if boundary_grid is not None else boundary_sample_grid(n)
    interior_res = float(np.max(np.abs(ops.l4_cubic(n, u.jets(ipts, order=2)))))
    bj = u.boundary_jets(bpts, order=2)
    energy = e2(u, n, rules)
    target = energy / sphere_volume(n) * bj.value ** (3.0 * (n + 1) / (n - 3))
    boundary_res = float(np.max(np.abs(ops.b3_cubic(n, bj) - target)))
    return interior_res, boundary_res


def stability_expression(
    u: ScalarField, n: int, rules: Optional[RuleSet] = None
) -> float:
    """Value of the final stability bound's right-hand side:
    int [ 2n/(3(n-3)) |grad u|^4 + 8/(3(n-3)) T1(grad u, grad u)
          - n(n-5)/6 u^2 |grad u|^2 ]
    + oint [ (2/3) u H(u) |tgrad u|^2 + ((n-3)/3) u^2 |tgrad u|^2 ].
    Vanishes at constants; nonnegative for n <= 5."""
    if n not in (4, 5):
        raise ValidationError("stability expression requires n in {4, 5}")
    rules = rules or RuleSet.default(n)

    def interior(pts):
        j = u.jets(pts, order=2)
        gsq = j.grad_norm_sq()
        t1 = ops.t1_op(n, j)
        t1_gg = np.einsum("...ij,...i,...j->...", t1, j.gradient, j.gradient)
        return (
            2.0 * n / (3.0 * (n - 3)) * gsq ** 2
            + 8.0 / (3.0 * (n - 3)) * t1_gg
            - n * (n - 5) / 6.0 * j.value ** 2 * gsq,
        )

    def boundary(pts):
        b = u.boundary_jets(pts, order=2)
        tg2 = b.tangential_grad_norm_sq()
        return (
            (2.0 / 3.0 * b.value * ops.h_op(n, b) + (n - 3) / 3.0 * b.value ** 2)
            * tg2,
        )

    return integrate_many(rules.interior, interior)[0] + integrate_many(
        rules.boundary, boundary
    )[0]
