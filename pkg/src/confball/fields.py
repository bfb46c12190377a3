"""Analytic scalar-field families on the closed unit ball.

Every family evaluates exact jets (closed-form differentiation, no
numerical differentiation): constants and polynomials to any order,
conformal-bubble and flat-factor families through the Taylor calculus in
`jets`.  Boundary jets are decomposed using the umbilic structure of the
unit sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .errors import CapabilityError, DomainError, ValidationError
from .jets import (
    BoundaryJet,
    Jet2,
    boundary_decompose,
    jet_add,
    jet_compose_map,
    jet_constant,
    jet_log,
    jet_mul,
    jet_power,
    jet_scale,
)
from .mobius import MobiusMap
from .poly import MultiPolynomial

__all__ = [
    "ScalarField",
    "ConstantField",
    "PolynomialField",
    "EscobarBubble",
    "FlatFactor",
    "CriticalFlatLog",
    "RandomSmoothField",
    "PullbackField",
    "SumField",
    "AffineField",
    "evaluate_jet",
    "boundary_jet",
    "cone_membership",
    "ConeReport",
    "field_from_spec",
    "interior_sample_grid",
    "boundary_sample_grid",
    "coordinate_field",
]


def check_dimension(n: int) -> int:
    if n not in (3, 4, 5):
        raise ValidationError(f"boundary dimension must be 3, 4 or 5, got {n}")
    return n


class ScalarField:
    """Base class: an analytic function on the closed unit ball."""

    n: int

    @property
    def m(self) -> int:
        return self.n + 1

    max_jet_order: int = 3

    def jets(self, points: np.ndarray, order: int = 2) -> Jet2:
        raise NotImplementedError

    def values(self, points: np.ndarray) -> np.ndarray:
        return self.jets(points, order=0).value

    def boundary_jets(self, points: np.ndarray, order: int = 2) -> BoundaryJet:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return boundary_decompose(points, self.jets(points, order=order), self.n)

    def to_spec(self) -> dict:
        raise ValidationError(f"{type(self).__name__} has no serializable spec")


@dataclass(frozen=True)
class ConstantField(ScalarField):
    n: int
    value: float

    def __post_init__(self):
        check_dimension(self.n)

    def jets(self, points, order=2):
        return jet_constant(self.value, np.atleast_2d(points), order)

    def to_spec(self):
        return {"variant": "Constant", "n": self.n, "params": {"value": self.value}}


@dataclass(frozen=True)
class PolynomialField(ScalarField):
    n: int
    poly: MultiPolynomial

    def __post_init__(self):
        check_dimension(self.n)
        if self.poly.m != self.n + 1:
            raise ValidationError("polynomial variable count must equal n + 1")

    @staticmethod
    def from_terms(n: int, terms: dict) -> "PolynomialField":
        return PolynomialField(n, MultiPolynomial.from_terms(n + 1, terms))

    def jets(self, points, order=2):
        return self.poly.jets(np.atleast_2d(points), order)

    def values(self, points):
        return self.poly(np.atleast_2d(points))

    def scaled(self, c: float) -> "PolynomialField":
        return PolynomialField(self.n, self.poly.scale(c))

    def shifted(self, c: float) -> "PolynomialField":
        return PolynomialField(self.n, self.poly.shift(c))

    def to_spec(self):
        terms = [[list(alpha), c] for alpha, c in sorted(self.poly.terms().items())]
        return {"variant": "Polynomial", "n": self.n, "params": {"terms": terms}}


def coordinate_field(n: int, i: int) -> PolynomialField:
    """The coordinate function x^i (0-based)."""
    alpha = [0] * (n + 1)
    alpha[i] = 1
    return PolynomialField.from_terms(n, {tuple(alpha): 1.0})


@dataclass(frozen=True)
class EscobarBubble(ScalarField):
    """u(x) = a |r x - xi0|^{1-n}: the extremal family of the linear trace
    inequality, harmonic on the ball for every r < 1."""

    n: int
    a: float
    r: float
    xi0: np.ndarray

    def __post_init__(self):
        check_dimension(self.n)
        xi = np.asarray(self.xi0, dtype=float)
        object.__setattr__(self, "xi0", xi)
        if not (0.0 <= self.r < 1.0):
            raise ValidationError("bubble offset r must lie in [0, 1)")
        if self.a <= 0.0:
            raise ValidationError("bubble amplitude a must be positive")
        if xi.shape != (self.n + 1,) or abs(np.linalg.norm(xi) - 1.0) > 1e-12:
            raise ValidationError("xi0 must be a unit vector in R^{n+1}")

    def _s_jet(self, points, order):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        N, m = pts.shape
        w = self.r * pts - self.xi0
        value = np.einsum("ni,ni->n", w, w)
        if order == 0:
            return Jet2(value)
        grad = 2.0 * self.r * w
        if order == 1:
            return Jet2(value, grad)
        hess = np.broadcast_to(2.0 * self.r ** 2 * np.eye(m), (N, m, m)).copy()
        if order == 2:
            return Jet2(value, grad, hess)
        return Jet2(value, grad, hess, np.zeros((N, m, m, m)))

    def jets(self, points, order=2):
        s = self._s_jet(points, order)
        return jet_scale(jet_power(s, (1.0 - self.n) / 2.0), self.a)

    def to_spec(self):
        return {
            "variant": "EscobarBubble",
            "n": self.n,
            "params": {"a": self.a, "r": self.r, "xi0": self.xi0.tolist()},
        }


def _map_denominator_jet(mp: MobiusMap, points, order):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    N, m = pts.shape
    b = mp.base_point
    bb = b @ b
    value = 1.0 - 2.0 * pts @ b + bb * np.einsum("ni,ni->n", pts, pts)
    if order == 0:
        return Jet2(value)
    grad = -2.0 * b[None, :] + 2.0 * bb * pts
    if order == 1:
        return Jet2(value, grad)
    hess = np.broadcast_to(2.0 * bb * np.eye(m), (N, m, m)).copy()
    if order == 2:
        return Jet2(value, grad, hess)
    return Jet2(value, grad, hess, np.zeros((N, m, m, m)))


@dataclass(frozen=True)
class FlatFactor(ScalarField):
    """|J_Phi|^{(n-3)/(4(n+1))}: the conformal factor whose metric is the
    pullback of the flat metric (n in {4, 5}).  Identity map gives u = 1."""

    n: int
    map: MobiusMap

    def __post_init__(self):
        check_dimension(self.n)
        if self.n == 3:
            raise ValidationError("FlatFactor is the non-critical family (n in {4,5})")
        if self.map.m != self.n + 1:
            raise ValidationError("map dimension must equal n + 1")

    def jets(self, points, order=2):
        p = (self.n - 3.0) / 4.0
        bb = self.map.base_point @ self.map.base_point
        d = _map_denominator_jet(self.map, points, order)
        return jet_scale(jet_power(d, -p), (1.0 - bb) ** p)

    def to_spec(self):
        return {
            "variant": "FlatFactor",
            "n": self.n,
            "params": {"map": self.map.to_spec()},
        }


@dataclass(frozen=True)
class CriticalFlatLog(ScalarField):
    """(1/4) log |J_Phi| on the four-ball; identity map gives u = 0."""

    map: MobiusMap

    @property
    def n(self) -> int:
        return 3

    def __post_init__(self):
        if self.map.m != 4:
            raise ValidationError("CriticalFlatLog lives on the four-ball")

    def jets(self, points, order=2):
        bb = self.map.base_point @ self.map.base_point
        d = _map_denominator_jet(self.map, points, order)
        out = jet_scale(jet_log(d), -1.0)
        const = math.log(1.0 - bb)
        return Jet2(out.value + const, out.gradient, out.hessian, out.third)

    def to_spec(self):
        return {
            "variant": "CriticalFlatLog",
            "n": 3,
            "params": {"map": self.map.to_spec()},
        }


class RandomSmoothField(PolynomialField):
    """Seeded random polynomial: coefficients uniform in [-amplitude,
    amplitude] over all monomials of total degree <= degree, plus an
    optional constant shift.  Bit-reproducible for a fixed seed."""

    def __init__(self, n: int, seed: int, degree: int = 4,
                 amplitude: float = 1.0, shift: float = 0.0):
        check_dimension(n)
        from .poly import monomial_exponents

        exps = monomial_exponents(n + 1, degree)
        rng = np.random.default_rng(seed)
        coeffs = rng.uniform(-amplitude, amplitude, size=len(exps))
        poly = MultiPolynomial(n + 1, degree, coeffs).shift(shift)
        super().__init__(n, poly)
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "rand_degree", degree)
        object.__setattr__(self, "amplitude", amplitude)
        object.__setattr__(self, "shift", shift)

    def to_spec(self):
        return {
            "variant": "RandomSmooth",
            "n": self.n,
            "params": {
                "seed": self.seed,
                "degree": self.rand_degree,
                "amplitude": self.amplitude,
                "shift": self.shift,
            },
        }


@dataclass(frozen=True)
class PullbackField(ScalarField):
    """Conformal pullback of a field through a Moebius map.

    Non-critical: |J|^{(n-3)/(4(n+1))} (u o Phi).  Critical (n = 3):
    u o Phi + (1/4) log |J|.  Jets come from the exact chain rule through
    the map's closed-form derivatives.
    """

    base: ScalarField
    map: MobiusMap

    def __post_init__(self):
        if self.map.m != self.base.n + 1:
            raise ValidationError("map dimension must equal n + 1")

    @property
    def n(self) -> int:
        return self.base.n

    def jets(self, points, order=2):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mj = self.map.map_jet(pts, order=max(order, 1))
        inner = jet_compose_map(self.base.jets(mj.value, order), mj)
        if self.n == 3:
            extra = CriticalFlatLog(self.map).jets(pts, order)
            return jet_add(inner, extra)
        factor = FlatFactor(self.n, self.map).jets(pts, order)
        return jet_mul(factor, inner)

    def values(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inner = self.base.values(self.map.apply(pts))
        if self.n == 3:
            lam = self.map.conformal_factor(pts)
            return inner + np.log(lam)
        lam = self.map.conformal_factor(pts)
        return lam ** ((self.n - 3.0) / 4.0) * inner


@dataclass(frozen=True)
class SumField(ScalarField):
    a: ScalarField
    b: ScalarField

    def __post_init__(self):
        if self.a.n != self.b.n:
            raise ValidationError("summands live on different balls")

    @property
    def n(self) -> int:
        return self.a.n

    def jets(self, points, order=2):
        return jet_add(self.a.jets(points, order), self.b.jets(points, order))

    def values(self, points):
        return self.a.values(points) + self.b.values(points)


@dataclass(frozen=True)
class AffineField(ScalarField):
    """scale * u + shift; used by volume normalization."""

    base: ScalarField
    scale: float = 1.0
    shift: float = 0.0

    @property
    def n(self) -> int:
        return self.base.n

    def jets(self, points, order=2):
        j = jet_scale(self.base.jets(points, order), self.scale)
        return Jet2(j.value + self.shift, j.gradient, j.hessian, j.third)

    def values(self, points):
        return self.scale * self.base.values(points) + self.shift


def evaluate_jet(field: ScalarField, point: Sequence[float]) -> Jet2:
    """Exact (value, gradient, Hessian) at an interior point."""
    p = np.asarray(point, dtype=float)
    if p.shape != (field.n + 1,):
        raise ValidationError("point dimension must equal n + 1")
    if p @ p >= 1.0:
        raise DomainError("point outside the open unit ball")
    j = field.jets(p[None, :], order=2)
    return Jet2(j.value[0], j.gradient[0], j.hessian[0])


def boundary_jet(field: ScalarField, point: Sequence[float]) -> BoundaryJet:
    """Boundary decomposition of the jet at a unit vector."""
    p = np.asarray(point, dtype=float)
    if p.shape != (field.n + 1,):
        raise ValidationError("point dimension must equal n + 1")
    if abs(np.linalg.norm(p) - 1.0) > 1e-12:
        raise DomainError("boundary points must lie on the unit sphere")
    bj = field.boundary_jets(p[None, :], order=2)
    return BoundaryJet(
        p,
        bj.value[0],
        bj.normal_derivative[0],
        bj.tangential_gradient[0],
        bj.tangential_laplacian[0],
        bj.gradient[0],
        bj.hessian[0],
    )


@lru_cache(maxsize=16)
def interior_sample_grid(n: int, count: int = 4096) -> np.ndarray:
    """Deterministic quasi-random points in the open ball (Halton)."""
    if count < 1:
        raise ValidationError("sample grid must be non-empty")
    m = n + 1
    u = qmc.Halton(d=m + 1, scramble=False).random(count)
    z = ndtri(np.clip(u[:, :m], 1e-12, 1.0 - 1e-12))
    norms = np.linalg.norm(z, axis=1)
    norms[norms < 1e-12] = 1.0
    radius = u[:, m] ** (1.0 / m) * (1.0 - 1e-9)
    pts = z / norms[:, None] * radius[:, None]
    pts.setflags(write=False)
    return pts


@lru_cache(maxsize=16)
def boundary_sample_grid(n: int, count: int = 2048) -> np.ndarray:
    """Deterministic quasi-random points on the unit sphere (Halton)."""
    if count < 1:
        raise ValidationError("sample grid must be non-empty")
    m = n + 1
    u = qmc.Halton(d=m, scramble=False).random(count)
    z = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    norms = np.linalg.norm(z, axis=1)
    norms[norms < 1e-12] = 1.0
    pts = z / norms[:, None]
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    pts.setflags(write=False)
    return pts


@dataclass(frozen=True)
class ConeReport:
    """Sampled verdict for membership in the nonnegative cone
    {sigma_1(u) >= 0, H(u) > 0}; a certificate on the grids, not a proof."""

    sigma1_min: float
    h_min: float
    member: bool
    interior_count: int
    boundary_count: int


def cone_membership(
    field: ScalarField, interior_count: int = 4096, boundary_count: int = 2048
) -> ConeReport:
    """Minimum of sigma_1(u) over an interior grid and of H(u) over a
    boundary grid, with the resulting membership verdict."""

    from .operators import h_op, sigma1_op

    n = field.n
    ipts = interior_sample_grid(n, interior_count)
    bpts = boundary_sample_grid(n, boundary_count)
    s1 = sigma1_op(n, field.jets(ipts, order=2))
    h = h_op(n, field.boundary_jets(bpts, order=2))
    s1_min = float(np.min(s1))
    h_min = float(np.min(h))
    return ConeReport(
        s1_min, h_min, bool(s1_min >= 0.0 and h_min > 0.0),
        interior_count, boundary_count,
    )


_VARIANTS = {}


def field_from_spec(spec: dict) -> ScalarField:
    """Build a field from its JSON description.

    Schema: {"variant": <name>, "n": <3|4|5>, "params": {...}} with
    variants Constant, Polynomial, EscobarBubble, FlatFactor,
    CriticalFlatLog and RandomSmooth.
    """

    try:
        variant = spec["variant"]
        n = int(spec["n"])
        params = spec.get("params", {})
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed field spec: {exc}") from exc
    check_dimension(n)
    try:
        if variant == "Constant":
            return ConstantField(n, float(params["value"]))
        if variant == "Polynomial":
            terms = {tuple(int(a) for a in alpha): float(c)
                     for alpha, c in params["terms"]}
            return PolynomialField.from_terms(n, terms)
        if variant == "EscobarBubble":
            return EscobarBubble(
                n, float(params["a"]), float(params["r"]),
                np.asarray(params["xi0"], dtype=float),
            )
        if variant == "FlatFactor":
            return FlatFactor(n, MobiusMap.from_spec(params["map"]))
        if variant == "CriticalFlatLog":
            if n != 3:
                raise ValidationError("CriticalFlatLog requires n = 3")
            return CriticalFlatLog(MobiusMap.from_spec(params["map"]))
        if variant == "RandomSmooth":
            return RandomSmoothField(
                n,
                int(params["seed"]),
                int(params.get("degree", 4)),
                float(params.get("amplitude", 1.0)),
                float(params.get("shift", 0.0)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"invalid parameters for variant {variant}: {exc}")
    raise ValidationError(f"unknown field variant {variant!r}")
