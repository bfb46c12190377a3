"""Deterministic quadrature on the unit ball B^{n+1} and unit sphere S^n.

Rules are tensor products with declared polynomial exactness:

* sphere: Gauss--Gegenbauer nodes in the cosine of each polar angle
  (weight (1-t^2)^{(n-k-1)/2} for the k-th angle) times an equispaced
  azimuthal rule, exact for all spherical polynomials of total degree up
  to the requested exactness;
* ball: radial Gauss--Jacobi with weight r^n on [0, 1] tensored with a
  sphere rule.

Node/weight construction symmetrizes every one-dimensional rule so that
odd integrands cancel exactly.  Summation is compensated (exactly rounded
per chunk, in a fixed node order), so repeated integrals are bit-identical
and independent of any evaluation parallelism.

Per-angle exactness degrees can be raised independently of the base degree;
integrands that concentrate near a boundary point aligned with the polar
axis (conformal bubbles with large offset) need a much finer rule in the
first polar angle and in radius than anywhere else, and an isotropic rule
of that degree would be wastefully large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gamma, roots_gegenbauer, roots_jacobi, roots_legendre

from .errors import NumericError, ValidationError

__all__ = [
    "QuadratureRule",
    "RuleSet",
    "build_rule",
    "integrate",
    "integrate_many",
    "integrate_ball_streamed",
    "sphere_volume",
    "ball_volume",
    "sphere_monomial_moment",
    "ball_monomial_moment",
    "DEFAULT_DEGREE",
    "save_rule",
    "load_rule",
]

DEFAULT_DEGREE = {3: 24, 4: 24, 5: 20}

_RULE_FORMAT_VERSION = 1

_CHUNK = 262144


def sphere_volume(n: int) -> float:
    """Volume of the unit n-sphere."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / gamma((n + 1) / 2.0)


def ball_volume(n: int) -> float:
    """Volume of the unit ball in R^{n+1} (boundary dimension n)."""
    return sphere_volume(n) / (n + 1)


def sphere_monomial_moment(n: int, alpha: Sequence[int]) -> float:
    """Closed-form integral of x^alpha over S^n."""
    alpha = list(alpha)
    if len(alpha) != n + 1:
        raise ValidationError("multi-index length must equal the ambient dimension")
    if any(a % 2 for a in alpha):
        return 0.0
    num = 2.0 * np.prod([gamma((a + 1) / 2.0) for a in alpha])
    return float(num / gamma((sum(alpha) + n + 1) / 2.0))


def ball_monomial_moment(n: int, alpha: Sequence[int]) -> float:
    """Closed-form integral of x^alpha over the unit ball in R^{n+1}."""
    return sphere_monomial_moment(n, alpha) / (sum(alpha) + n + 1)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights with declared polynomial exactness."""

    domain: str  # "ball" or "sphere"
    n: int  # boundary dimension; ambient dimension is n + 1
    nodes: np.ndarray  # (N, n + 1)
    weights: np.ndarray  # (N,)
    exactness_degree: int
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.weights)


def _symmetrized_gegenbauer(npts: int, alpha: float):
    if abs(alpha - 0.5) < 1e-12:
        t, w = roots_legendre(npts)
    else:
        t, w = roots_gegenbauer(npts, alpha)
    # enforce exact +-t pairing so odd integrands cancel bitwise
    t = 0.5 * (t - t[::-1])
    w = 0.5 * (w + w[::-1])
    return t, w


def _azimuthal_rule(npts: int):
    # mirrored construction: second half is the exact negation of the first
    half = (npts + 1) // 2
    phi = np.arange(half) * (math.pi / half)
    c = np.cos(phi)
    s = np.sin(phi)
    cos_all = np.concatenate([c, -c])
    sin_all = np.concatenate([s, -s])
    weights = np.full(2 * half, math.pi / half)
    return cos_all, sin_all, weights


def _angle_counts(n: int, degree: int, angular_degrees: Optional[Sequence[int]]):
    degs = [degree] * n if angular_degrees is None else list(angular_degrees)
    if len(degs) != n:
        raise ValidationError(
            f"angular_degrees needs {n} entries ({n - 1} polar + azimuth)"
        )
    polar = [max(1, d // 2 + 1) for d in degs[:-1]]
    azim = max(4, degs[-1] + 1)
    return polar, azim


def _sphere_rule(n: int, degree: int, angular_degrees=None) -> QuadratureRule:
    if n < 2:
        raise ValidationError("sphere rules require boundary dimension n >= 2")
    polar_counts, azim_count = _angle_counts(n, degree, angular_degrees)
    tlist, wlist, slist = [], [], []
    for k, npts in enumerate(polar_counts, start=1):
        alpha = (n - k) / 2.0
        t, w = _symmetrized_gegenbauer(npts, alpha)
        tlist.append(t)
        wlist.append(w)
        slist.append(np.sqrt(1.0 - t * t))
    cphi, sphi, wphi = _azimuthal_rule(azim_count)

    grids = np.meshgrid(*tlist, np.arange(len(cphi)), indexing="ij")
    shape = grids[0].shape
    m = n + 1
    nodes = np.empty(shape + (m,))
    sin_running = np.ones(shape)
    sin_grids = np.meshgrid(*slist, np.arange(len(cphi)), indexing="ij")
    for k in range(n - 1):
        nodes[..., k] = sin_running * grids[k]
        sin_running = sin_running * sin_grids[k]
    nodes[..., n - 1] = sin_running * cphi[grids[-1]]
    nodes[..., n] = sin_running * sphi[grids[-1]]

    weights = np.ones(shape)
    wgrids = np.meshgrid(*wlist, wphi, indexing="ij")
    for wg in wgrids:
        weights = weights * wg

    return QuadratureRule(
        "sphere",
        n,
        nodes.reshape(-1, m),
        weights.reshape(-1),
        degree,
        {"polar_counts": polar_counts, "azimuth_count": len(cphi)},
    )


def _radial_rule(n: int, degree: int, radial_degree=None):
    deg = degree if radial_degree is None else radial_degree
    npts = max(1, deg // 2 + 1)
    t, w = roots_jacobi(npts, 0.0, float(n))
    r = 0.5 * (1.0 + t)
    w = w / 2.0 ** (n + 1)
    return r, w


def build_rule(
    domain: str,
    n: int,
    exactness_degree: int,
    angular_degrees: Optional[Sequence[int]] = None,
    radial_degree: Optional[int] = None,
) -> QuadratureRule:
    """Construct a quadrature rule over the ball or the sphere.

    Parameters
    ----------
    domain : "ball" or "sphere"
    n : boundary dimension (3, 4 or 5; ambient dimension n + 1)
    exactness_degree : total polynomial degree integrated exactly
    angular_degrees : optional per-angle degrees (n - 1 polar, then azimuth)
        overriding the isotropic default
    radial_degree : optional override of the radial degree (ball only)
    """

    if n not in (3, 4, 5):
        raise ValidationError(f"unsupported boundary dimension n={n}")
    if exactness_degree < 1:
        raise ValidationError("exactness_degree must be at least 1")
    if domain == "sphere":
        return _sphere_rule(n, exactness_degree, angular_degrees)
    if domain != "ball":
        raise ValidationError(f"unknown domain {domain!r}")
    sph = _sphere_rule(n, exactness_degree, angular_degrees)
    r, wr = _radial_rule(n, exactness_degree, radial_degree)
    nodes = (r[:, None, None] * sph.nodes[None, :, :]).reshape(-1, n + 1)
    weights = (wr[:, None] * sph.weights[None, :]).reshape(-1)
    meta = dict(sph.meta)
    meta["radial_count"] = len(r)
    return QuadratureRule("ball", n, nodes, weights, exactness_degree, meta)


def _chunk_slices(total: int, chunk: int):
    for start in range(0, total, chunk):
        yield slice(start, min(start + chunk, total))


def integrate(rule: QuadratureRule, integrand: Callable, chunk: int = _CHUNK) -> float:
    """Weighted sum of integrand over the rule's nodes.

    The integrand receives (N_chunk, n+1) arrays of points and must return
    (N_chunk,) values.  Summation is exactly rounded in a fixed node order,
    so repeated calls are bit-identical.
    """

    return integrate_many(rule, lambda pts: (integrand(pts),), chunk=chunk)[0]


def integrate_many(
    rule: QuadratureRule, integrands: Callable, chunk: int = _CHUNK
) -> list:
    """Integrate several integrands sharing one evaluation pass.

    `integrands(points)` returns a tuple of (N_chunk,) arrays; each entry is
    summed with the same compensated, order-fixed reduction as `integrate`.
    """

    partials = None
    for sl in _chunk_slices(len(rule), chunk):
        pts = rule.nodes[sl]
        w = rule.weights[sl]
        values = integrands(pts)
        if partials is None:
            partials = [[] for _ in values]
        for k, v in enumerate(values):
            v = np.asarray(v, dtype=float)
            if not np.all(np.isfinite(v)):
                bad = int(np.flatnonzero(~np.isfinite(v))[0])
                node = rule.nodes[sl.start + bad]
                raise NumericError(
                    f"non-finite integrand value at node {sl.start + bad}: "
                    f"{node.tolist()}"
                )
            partials[k].append(math.fsum((w * v).tolist()))
    if partials is None:
        raise ValidationError("empty quadrature rule")
    return [math.fsum(p) for p in partials]


def integrate_ball_streamed(
    n: int,
    exactness_degree: int,
    integrand: Callable,
    angular_degrees: Optional[Sequence[int]] = None,
    radial_degree: Optional[int] = None,
    chunk: int = _CHUNK,
) -> float:
    """Ball integral streamed shell-by-shell over the radial nodes.

    Equivalent to `integrate(build_rule("ball", ...), f)` but never
    materializes the product grid; used when the per-angle degrees are
    raised enough that the full tensor rule would not fit in memory.
    """

    sph = _sphere_rule(n, exactness_degree, angular_degrees)
    r, wr = _radial_rule(n, exactness_degree, radial_degree)
    shell_sums = []
    for q in range(len(r)):
        pts = r[q] * sph.nodes
        total = integrate_many(
            QuadratureRule("sphere", n, pts, sph.weights, exactness_degree),
            lambda p: (integrand(p),),
            chunk=chunk,
        )[0]
        shell_sums.append(wr[q] * total)
    return math.fsum(shell_sums)


@dataclass(frozen=True)
class RuleSet:
    """An interior ball rule and its companion boundary sphere rule."""

    interior: QuadratureRule
    boundary: QuadratureRule

    @property
    def n(self) -> int:
        return self.interior.n

    @property
    def degree(self) -> int:
        return self.interior.exactness_degree

    @staticmethod
    def default(n: int, degree: Optional[int] = None) -> "RuleSet":
        d = DEFAULT_DEGREE[n] if degree is None else degree
        return RuleSet(build_rule("ball", n, d), build_rule("sphere", n, d))


def save_rule(rule: QuadratureRule, path: str) -> None:
    """Cache a rule to disk (.npz, versioned)."""
    np.savez_compressed(
        path,
        version=_RULE_FORMAT_VERSION,
        domain=rule.domain,
        n=rule.n,
        nodes=rule.nodes,
        weights=rule.weights,
        exactness_degree=rule.exactness_degree,
    )


def load_rule(path: str) -> QuadratureRule:
    data = np.load(path, allow_pickle=False)
    if int(data["version"]) != _RULE_FORMAT_VERSION:
        raise ValidationError("unsupported cached-rule format version")
    return QuadratureRule(
        str(data["domain"]),
        int(data["n"]),
        data["nodes"],
        data["weights"],
        int(data["exactness_degree"]),
    )
