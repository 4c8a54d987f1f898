"""Polynomial machinery on the reference interval [0, 1].

Provides the Radau IIA nodes/tableau, barycentric Lagrange bases,
shifted Legendre polynomials, and Gauss-Legendre quadrature rules.
All objects are immutable after construction and safe to share
between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import roots_jacobi

MAX_STAGES = 8
MAX_GAUSS_POINTS = 64

_SQRT6 = np.sqrt(6.0)

# Closed-form Radau IIA data for low stage counts, used to cross-check the
# numerically computed tableaus at construction time.
_CLOSED_FORM_NODES = {
    1: np.array([1.0]),
    2: np.array([1.0 / 3.0, 1.0]),
    3: np.array([(4.0 - _SQRT6) / 10.0, (4.0 + _SQRT6) / 10.0, 1.0]),
}
_CLOSED_FORM_A = {
    1: np.array([[1.0]]),
    2: np.array([[5.0 / 12.0, -1.0 / 12.0], [3.0 / 4.0, 1.0 / 4.0]]),
    3: np.array(
        [
            [(88 - 7 * _SQRT6) / 360, (296 - 169 * _SQRT6) / 1800, (-2 + 3 * _SQRT6) / 225],
            [(296 + 169 * _SQRT6) / 1800, (88 + 7 * _SQRT6) / 360, (-2 - 3 * _SQRT6) / 225],
            [(16 - _SQRT6) / 36, (16 + _SQRT6) / 36, 1.0 / 9.0],
        ]
    ),
}


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(np.asarray(arr, dtype=float))
    out.setflags(write=False)
    return out


class LagrangeBasis:
    """Barycentric Lagrange basis on a set of distinct nodes in [0, 1].

    Evaluation uses the second barycentric form, which is stable for the
    clustered node sets that arise from Radau points.
    """

    def __init__(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 1:
            raise ValueError("nodes must be a non-empty 1-D array")
        if np.unique(nodes).size != nodes.size:
            raise ValueError("Lagrange nodes must be distinct")
        self.nodes = _freeze(nodes)
        diff = nodes[:, None] - nodes[None, :]
        np.fill_diagonal(diff, 1.0)
        self.weights = _freeze(1.0 / diff.prod(axis=1))
        n = nodes.size
        D = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i != j:
                    D[i, j] = (self.weights[j] / self.weights[i]) / (nodes[i] - nodes[j])
        np.fill_diagonal(D, -D.sum(axis=1))
        # nodal differentiation matrix, D[i, j] = l_j'(node_i)
        self.diff_matrix = _freeze(D)

    def __len__(self) -> int:
        return self.nodes.size

    def eval_matrix(self, taus) -> np.ndarray:
        """Matrix B with B[m, j] = l_j(tau_m)."""
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        d = taus[:, None] - self.nodes[None, :]
        hit = d == 0.0
        on_node = hit.any(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = self.weights[None, :] / d
            out = z / z.sum(axis=1, keepdims=True)
        if on_node.any():
            out[on_node] = hit[on_node].astype(float)
        return out

    def deriv_matrix(self, taus) -> np.ndarray:
        """Matrix B' with B'[m, j] = l_j'(tau_m).

        Exact for the polynomial basis: the derivative (degree n-2) is
        re-expanded in the same basis via the nodal differentiation matrix.
        """
        return self.eval_matrix(taus) @ self.diff_matrix

    def integrals(self, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        """Vector of definite integrals of each l_j over [lo, hi]."""
        rule = gauss_rule(max(1, (len(self) + 1) // 2 + 1))
        pts, wts = rule.mapped(lo, hi)
        return wts @ self.eval_matrix(pts)


def lagrange_basis(nodes) -> LagrangeBasis:
    """Build a barycentric Lagrange basis for the given distinct nodes."""
    return LagrangeBasis(nodes)


class LegendreBasis:
    """Shifted Legendre polynomials L_0 .. L_max on [0, 1].

    L_i(t) = P_i(2t - 1), so L_i(1) = 1 for every i, and
    squared L2(0,1) norms are 1/(2i + 1).
    """

    def __init__(self, max_degree: int):
        if max_degree < 0:
            raise ValueError("max_degree must be >= 0")
        self.max_degree = int(max_degree)
        self.sq_norms = _freeze(1.0 / (2.0 * np.arange(max_degree + 1) + 1.0))
        # coefficient rows for derivative evaluation
        self._dcoeffs = []
        for i in range(max_degree + 1):
            e = np.zeros(i + 1)
            e[i] = 1.0
            self._dcoeffs.append(npleg.legder(e) if i > 0 else np.zeros(1))

    def eval_matrix(self, taus) -> np.ndarray:
        """Matrix with column i holding L_i at the given points."""
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        return npleg.legvander(2.0 * taus - 1.0, self.max_degree)

    def deriv_matrix(self, taus) -> np.ndarray:
        """Matrix with column i holding L_i' at the given points."""
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        x = 2.0 * taus - 1.0
        out = np.zeros((taus.size, self.max_degree + 1))
        for i, dc in enumerate(self._dcoeffs):
            out[:, i] = 2.0 * npleg.legval(x, dc)
        return out


@lru_cache(maxsize=None)
def legendre_basis(max_degree: int) -> LegendreBasis:
    return LegendreBasis(max_degree)


@dataclass(frozen=True)
class GaussRule:
    """Gauss-Legendre quadrature on [0, 1], exact to degree 2n - 1."""

    n: int
    nodes: np.ndarray
    weights: np.ndarray

    def mapped(self, lo: float, hi: float):
        """Nodes and weights transplanted to [lo, hi]."""
        scale = hi - lo
        return lo + scale * self.nodes, scale * self.weights

    def integrate(self, values) -> np.ndarray:
        """Apply the rule on [0, 1] to sampled values (n, ...) -> (...)."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> GaussRule:
    """Gauss-Legendre rule with n points on [0, 1].

    The advertised polynomial exactness (degree 2n - 1) is verified on
    monomials at construction; a failure indicates a broken build.
    """
    if not 1 <= n <= MAX_GAUSS_POINTS:
        raise ValueError(f"gauss rule size must be in [1, {MAX_GAUSS_POINTS}], got {n}")
    x, w = npleg.leggauss(n)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    for m in range(2 * n):
        err = abs(weights @ nodes**m - 1.0 / (m + 1))
        if err > 1e-12 / (m + 1) + 1e-15:
            raise RuntimeError(f"gauss rule n={n} failed degree-{m} exactness: err={err:.3e}")
    return GaussRule(n=n, nodes=_freeze(nodes), weights=_freeze(weights))


@dataclass(frozen=True)
class RadauTableau:
    """Radau IIA data on [0, 1] for a q-stage scheme.

    c holds the ascending nodes with c[-1] = 1, a the coefficient matrix
    a[i, j] = integral of l_j over [0, c_i], b = a[-1] the quadrature
    weights, and lagrange_integrals the full-interval integrals of the
    Lagrange basis (equal to b).
    """

    q: int
    c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    lagrange_integrals: np.ndarray
    stage_basis: LagrangeBasis = field(repr=False)


def _right_radau_interior(q: int) -> np.ndarray:
    """Interior Radau IIA nodes on (0, 1): roots of the right-Radau polynomial.

    Seeds come from the Gauss-Jacobi (alpha=1, beta=0) companion-matrix
    eigenvalues, then each root is polished by Newton iteration on
    g(x) = P_{q-1}(x) - P_q(x), whose zero set on [-1, 1] is the node set.
    """
    if q == 1:
        return np.empty(0)
    x, _ = roots_jacobi(q - 1, 1.0, 0.0)
    g = np.zeros(q + 1)
    g[q - 1] = 1.0
    g[q] = -1.0
    dg = npleg.legder(g)
    d2g = npleg.legder(dg)
    for _ in range(4):
        val = npleg.legval(x, g)
        der = npleg.legval(x, dg)
        # Halley-flavoured correction keeps the last iteration quadratic even
        # when the seed is already at roundoff.
        x = x - val * der / (der**2 - 0.5 * val * npleg.legval(x, d2g))
    if np.max(np.abs(npleg.legval(x, g))) > 1e-12:
        raise RuntimeError(f"Radau node polish failed to converge for q={q}")
    return np.sort(0.5 * (x + 1.0))


@lru_cache(maxsize=None)
def radau_tableau(q: int) -> RadauTableau:
    """Radau IIA tableau with q stages.

    Parameters
    ----------
    q : int
        Stage count, 1 <= q <= 8. Beyond 8 the double-precision
        conditioning of the tableau degrades and nothing here needs it.

    Returns
    -------
    RadauTableau
        Nodes accurate to about 1e-15; all invariants (node ordering,
        row sums, weight sum, quadrature exactness through degree 2q - 2)
        are validated before the tableau is returned.
    """
    if not 1 <= q <= MAX_STAGES:
        raise ValueError(f"stage count must be in [1, {MAX_STAGES}], got {q}")
    c = np.concatenate([_right_radau_interior(q), [1.0]])
    basis = LagrangeBasis(c)
    rule = gauss_rule(q + 1)
    a = np.empty((q, q))
    for i in range(q):
        pts, wts = rule.mapped(0.0, c[i])
        a[i] = wts @ basis.eval_matrix(pts)
    b = a[-1].copy()

    if q in _CLOSED_FORM_NODES:
        if np.max(np.abs(c - _CLOSED_FORM_NODES[q])) > 5e-14:
            raise RuntimeError(f"Radau nodes disagree with closed form for q={q}")
        if np.max(np.abs(a - _CLOSED_FORM_A[q])) > 5e-14:
            raise RuntimeError(f"Radau coefficient matrix disagrees with closed form for q={q}")

    _validate_tableau(q, c, a, b)
    return RadauTableau(
        q=q,
        c=_freeze(c),
        a=_freeze(a),
        b=_freeze(b),
        lagrange_integrals=_freeze(b.copy()),
        stage_basis=basis,
    )


def _validate_tableau(q, c, a, b):
    if not (np.all(np.diff(c) > 0) and c[0] > 0 and c[-1] == 1.0):
        raise RuntimeError(f"Radau nodes out of order for q={q}")
    if abs(b.sum() - 1.0) > 1e-13:
        raise RuntimeError(f"Radau weights do not sum to 1 for q={q}")
    if np.max(np.abs(a.sum(axis=1) - c)) > 1e-13:
        raise RuntimeError(f"Radau row-sum identity violated for q={q}")
    if np.any(b <= 0):
        raise RuntimeError(f"Radau weights must be positive (q={q})")
    for m in range(2 * q - 1):
        if abs(b @ c**m - 1.0 / (m + 1)) > 1e-12:
            raise RuntimeError(f"Radau quadrature not exact at degree {m} for q={q}")
