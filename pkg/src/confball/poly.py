"""Multivariate polynomial tables with exact derivative jets.

Polynomials are stored as coefficient vectors over a graded monomial basis.
Differentiation is a precomputed linear map on coefficients, so evaluating
a full jet reduces to one monomial-matrix multiplication per point chunk.
This is the workhorse behind every polynomial scalar field and behind the
coefficient-space optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .jets import Jet2

_CHUNK = 65536


@lru_cache(maxsize=32)
def monomial_exponents(m: int, degree: int) -> np.ndarray:
    """All exponent multi-indices with |alpha| <= degree, graded lexicographic."""
    rows = []
    def rec(prefix, remaining, dims_left):
        if dims_left == 1:
            for e in range(remaining + 1):
                rows.append(prefix + [e])
            return
        for e in range(remaining + 1):
            rec(prefix + [e], remaining - e, dims_left - 1)
    rec([], degree, m)
    exps = np.array(rows, dtype=np.int64)
    order = np.lexsort(tuple(exps[:, i] for i in range(m - 1, -1, -1)))
    exps = exps[order]
    grading = np.argsort(exps.sum(axis=1), kind="stable")
    return exps[grading]


@lru_cache(maxsize=32)
def _basis_index(m: int, degree: int):
    exps = monomial_exponents(m, degree)
    return {tuple(row): k for k, row in enumerate(exps.tolist())}


@lru_cache(maxsize=32)
def _build_plan(m: int, degree: int):
    """For each nonconstant monomial: (parent index, coordinate) with
    x^alpha = x^parent * x_i, enabling incremental evaluation."""
    exps = monomial_exponents(m, degree)
    index = _basis_index(m, degree)
    parents = np.zeros(len(exps), dtype=np.int64)
    coords = np.zeros(len(exps), dtype=np.int64)
    for t, alpha in enumerate(exps.tolist()):
        if sum(alpha) == 0:
            parents[t] = -1
            continue
        i = next(k for k, a in enumerate(alpha) if a > 0)
        beta = list(alpha)
        beta[i] -= 1
        parents[t] = index[tuple(beta)]
        coords[t] = i
    return parents, coords


@lru_cache(maxsize=32)
def derivative_maps(m: int, degree: int) -> tuple:
    """Matrices D_i with (D_i c) the coefficients of d_i p for coefficients c."""
    exps = monomial_exponents(m, degree)
    index = _basis_index(m, degree)
    T = len(exps)
    maps = []
    for i in range(m):
        D = np.zeros((T, T))
        for col, alpha in enumerate(exps.tolist()):
            if alpha[i] == 0:
                continue
            beta = list(alpha)
            beta[i] -= 1
            D[index[tuple(beta)], col] = alpha[i]
        maps.append(D)
    return tuple(maps)


def monomial_matrix(m: int, degree: int, points: np.ndarray) -> np.ndarray:
    """Matrix M[p, t] over the graded basis, built incrementally
    (column t = column parent(t) times one coordinate)."""
    points = np.asarray(points, dtype=float)
    N = len(points)
    parents, coords = _build_plan(m, degree)
    M = np.empty((N, len(parents)), order="F")
    M[:, 0] = 1.0
    for t in range(1, len(parents)):
        np.multiply(M[:, parents[t]], points[:, coords[t]], out=M[:, t])
    return M


@dataclass(frozen=True)
class MultiPolynomial:
    """A polynomial in m variables over the graded basis of its degree."""

    m: int
    degree: int
    coeffs: np.ndarray  # (T,) over monomial_exponents(m, degree)

    @staticmethod
    def from_terms(m: int, terms: dict) -> "MultiPolynomial":
        """Build from a {exponent-tuple: coefficient} mapping."""
        if not terms:
            return MultiPolynomial(m, 0, np.zeros(1))
        degree = max(sum(a) for a in terms)
        index = _basis_index(m, degree)
        coeffs = np.zeros(len(monomial_exponents(m, degree)))
        for alpha, c in terms.items():
            if len(alpha) != m:
                raise ValueError("exponent tuple has wrong length")
            coeffs[index[tuple(int(a) for a in alpha)]] += float(c)
        return MultiPolynomial(m, degree, coeffs)

    @staticmethod
    def constant(m: int, c: float) -> "MultiPolynomial":
        return MultiPolynomial.from_terms(m, {tuple([0] * m): c})

    def terms(self) -> dict:
        exps = monomial_exponents(self.m, self.degree)
        return {
            tuple(int(e) for e in exps[k]): float(self.coeffs[k])
            for k in range(len(exps))
            if self.coeffs[k] != 0.0
        }

    def promote(self, degree: int) -> "MultiPolynomial":
        if degree < self.degree:
            raise ValueError("cannot demote polynomial degree")
        if degree == self.degree:
            return self
        index = _basis_index(self.m, degree)
        exps = monomial_exponents(self.m, self.degree)
        coeffs = np.zeros(len(monomial_exponents(self.m, degree)))
        for k, alpha in enumerate(exps.tolist()):
            coeffs[index[tuple(alpha)]] = self.coeffs[k]
        return MultiPolynomial(self.m, degree, coeffs)

    def __add__(self, other: "MultiPolynomial") -> "MultiPolynomial":
        d = max(self.degree, other.degree)
        a, b = self.promote(d), other.promote(d)
        return MultiPolynomial(self.m, d, a.coeffs + b.coeffs)

    def scale(self, c: float) -> "MultiPolynomial":
        return MultiPolynomial(self.m, self.degree, c * self.coeffs)

    def shift(self, c: float) -> "MultiPolynomial":
        coeffs = self.coeffs.copy()
        index = _basis_index(self.m, self.degree)
        coeffs[index[tuple([0] * self.m)]] += c
        return MultiPolynomial(self.m, self.degree, coeffs)

    def diff(self, i: int) -> "MultiPolynomial":
        D = derivative_maps(self.m, self.degree)[i]
        return MultiPolynomial(self.m, self.degree, D @ self.coeffs)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        exps = monomial_exponents(self.m, self.degree)
        out = np.empty(len(points))
        for s in range(0, len(points), _CHUNK):
            M = monomial_matrix(exps, points[s : s + _CHUNK])
            out[s : s + _CHUNK] = M @ self.coeffs
        return out

    def jet_coefficients(self, order: int) -> np.ndarray:
        """Columns: coefficient vectors of p, d_i p, d_i d_j p (i<=j), ..."""
        D = derivative_maps(self.m, self.degree)
        cols = [self.coeffs]
        if order >= 1:
            first = [D[i] @ self.coeffs for i in range(self.m)]
            cols.extend(first)
        if order >= 2:
            second = {}
            for i in range(self.m):
                for j in range(i, self.m):
                    second[(i, j)] = D[j] @ first[i]
                    cols.append(second[(i, j)])
        if order >= 3:
            for i in range(self.m):
                for j in range(i, self.m):
                    for k in range(j, self.m):
                        cols.append(D[k] @ second[(i, j)])
        return np.column_stack(cols)

    def jets(self, points: np.ndarray, order: int = 2) -> Jet2:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        N, m = points.shape
        exps = monomial_exponents(self.m, self.degree)
        C = self.jet_coefficients(order)
        vals = np.empty((N, C.shape[1]))
        for s in range(0, N, _CHUNK):
            M = monomial_matrix(exps, points[s : s + _CHUNK])
            vals[s : s + _CHUNK] = M @ C
        return unpack_jet_columns(vals, m, order)


def unpack_jet_columns(vals: np.ndarray, m: int, order: int) -> Jet2:
    """Reassemble stacked jet columns (value, grads, upper Hessian, ...)."""
    value = vals[:, 0]
    if order == 0:
        return Jet2(value)
    grad = vals[:, 1 : 1 + m]
    if order == 1:
        return Jet2(value, grad)
    hess = np.empty((len(vals), m, m))
    col = 1 + m
    for i in range(m):
        for j in range(i, m):
            hess[:, i, j] = vals[:, col]
            hess[:, j, i] = vals[:, col]
            col += 1
    if order == 2:
        return Jet2(value, grad, hess)
    third = np.empty((len(vals), m, m, m))
    for i in range(m):
        for j in range(i, m):
            for k in range(j, m):
                v = vals[:, col]
                for perm in {(i, j, k), (i, k, j), (j, i, k),
                             (j, k, i), (k, i, j), (k, j, i)}:
                    third[:, perm[0], perm[1], perm[2]] = v
                col += 1
    return Jet2(value, grad, hess, third)


def jet_column_count(m: int, order: int) -> int:
    count = 1
    if order >= 1:
        count += m
    if order >= 2:
        count += m * (m + 1) // 2
    if order >= 3:
        count += m * (m + 1) * (m + 2) // 6
    return count
