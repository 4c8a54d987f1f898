"""Uniform time meshes, piecewise polynomial functions, and time norms.

A :class:`MeshFunction` is a piecewise polynomial on the half-open slabs
J_n = (t_n, t_{n+1}] of a uniform mesh, stored as nodal values against a
declared reference-interval node set. Evaluation at a mesh point t_n
(n >= 1) returns the left limit; the value at t = 0 is carried separately.

Norms: :func:`lp_norm` is the continuous Lp(0, t_m) norm by composite
Gauss quadrature, :func:`discrete_lp_norm` the Radau-point lp norm
(k * sum over stage values, no quadrature). Both have prefix variants
returning the whole sequence of mesh-point prefixes at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .polyquad import RadauTableau, gauss_rule, lagrange_basis

DEFAULT_PANELS = 16
DEFAULT_POINTS = 10


@dataclass(frozen=True)
class TimeMesh:
    """Uniform partition of [0, T] into N half-open slabs J_n = (t_n, t_{n+1}]."""

    T: float
    N: int

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("final time T must be positive")
        if self.N < 1:
            raise ValueError("slab count N must be >= 1")

    @property
    def k(self) -> float:
        return self.T / self.N

    @property
    def grid(self) -> np.ndarray:
        # n*T/N rather than cumulative addition, so t_N == T to one ulp
        return np.arange(self.N + 1) * self.T / self.N

    def times_on_slab(self, n: int, taus) -> np.ndarray:
        """Global times t_n + tau*k for reference coordinates tau in [0, 1]."""
        return self.grid[n] + np.asarray(taus, dtype=float) * self.k

    def mesh_point_index(self, t: float) -> int:
        """Index m with t == t_m, or a ValueError if t is not a mesh point."""
        m = int(round(t / self.k))
        if not 0 <= m <= self.N or abs(t - m * self.T / self.N) > 1e-9 * self.k:
            raise ValueError(f"t={t!r} is not a mesh point of [0, {self.T}] with N={self.N}")
        return m

    def slab_of(self, t: np.ndarray) -> np.ndarray:
        """Slab indices with left-limit semantics; t == t_n maps to slab n-1."""
        return np.searchsorted(self.grid, t, side="left") - 1


class MeshFunction:
    """Piecewise polynomial in time with vector coefficients.

    Parameters
    ----------
    mesh : TimeMesh
    ref_nodes : array-like
        degree+1 distinct points in [0, 1]; per-slab values are stored
        against the Lagrange basis on these nodes.
    values : ndarray, shape (N, degree+1, d)
        Nodal coefficient vectors per slab.
    continuous : bool
        Declares membership in the continuous space; checked at
        construction (left and right limits must agree to 1e-12 relative
        at interior mesh points, and at t=0 against ``value_at_zero``).
    value_at_zero : ndarray, shape (d,)
        The value attached at t = 0 (defaults to zero).

    Instances are immutable by convention; the arrays are write-locked.
    """

    def __init__(self, mesh, ref_nodes, values, continuous=False, value_at_zero=None):
        values = np.asarray(values, dtype=float)
        if values.ndim != 3 or values.shape[0] != mesh.N:
            raise ValueError("values must have shape (N, degree+1, d)")
        self.mesh = mesh
        self.basis = lagrange_basis(ref_nodes)
        if values.shape[1] != len(self.basis):
            raise ValueError("values second axis must match the node count")
        self.values = values.copy()
        self.values.setflags(write=False)
        if value_at_zero is None:
            value_at_zero = np.zeros(values.shape[2])
        self.value_at_zero = np.asarray(value_at_zero, dtype=float).copy()
        self.value_at_zero.setflags(write=False)
        if self.value_at_zero.shape != (values.shape[2],):
            raise ValueError("value_at_zero has wrong dimension")
        self.continuous = bool(continuous)
        if self.continuous:
            self._check_continuity()

    @property
    def ref_nodes(self) -> np.ndarray:
        return self.basis.nodes

    @property
    def degree(self) -> int:
        return len(self.basis) - 1

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def _check_continuity(self, rtol=1e-12):
        scale = max(np.max(np.abs(self.values)), np.max(np.abs(self.value_at_zero)), 1e-300)
        left = self.eval_on_slab_many(np.arange(self.mesh.N), 1.0)
        right = self.eval_on_slab_many(np.arange(self.mesh.N), 0.0)
        jump = np.abs(right[1:] - left[:-1]).max() if self.mesh.N > 1 else 0.0
        jump0 = np.abs(right[0] - self.value_at_zero).max()
        if max(jump, jump0) > rtol * scale:
            raise ValueError("function declared continuous has mismatched slab limits")

    def eval_on_slab(self, n: int, taus) -> np.ndarray:
        """Values on slab n at reference coordinates tau, shape (m, d)."""
        return self.basis.eval_matrix(taus) @ self.values[n]

    def eval_on_slab_many(self, ns, tau: float) -> np.ndarray:
        """Values at one reference coordinate on many slabs, shape (len(ns), d)."""
        row = self.basis.eval_matrix([tau])[0]
        return np.einsum("j,njd->nd", row, self.values[ns])

    def deriv_on_slab(self, n: int, taus) -> np.ndarray:
        """Time-derivative values on slab n at reference coordinates tau."""
        return self.basis.deriv_matrix(taus) @ self.values[n] / self.mesh.k

    def _locate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.mesh.T * (1 + 1e-12) + 1e-300):
            raise ValueError("evaluation time outside [0, T]")
        return t, self.mesh.slab_of(np.minimum(t, self.mesh.T))

    def value(self, t):
        """Evaluate at scalar or array t; mesh points give the left limit."""
        scalar = np.isscalar(t) or np.ndim(t) == 0
        t, idx = self._locate(t)
        out = np.empty((t.size, self.dim))
        for n in np.unique(idx):
            sel = idx == n
            if n < 0:
                out[sel] = self.value_at_zero
            else:
                taus = (t[sel] - self.mesh.grid[n]) / self.mesh.k
                out[sel] = self.eval_on_slab(n, np.clip(taus, 0.0, 1.0))
        return out[0] if scalar else out

    def derivative(self, t):
        """Evaluate the slabwise derivative at scalar or array t (left limits)."""
        scalar = np.isscalar(t) or np.ndim(t) == 0
        t, idx = self._locate(t)
        out = np.empty((t.size, self.dim))
        for n in np.unique(idx):
            sel = idx == n
            if n < 0:
                raise ValueError("derivative undefined at t=0 (left limit convention)")
            taus = (t[sel] - self.mesh.grid[n]) / self.mesh.k
            out[sel] = self.deriv_on_slab(n, np.clip(taus, 0.0, 1.0))
        return out[0] if scalar else out

    def legendre_coeffs(self, n: int) -> np.ndarray:
        """Shifted-Legendre coefficients of slab n, shape (degree+1, d).

        Computed by exact Gauss quadrature of the projections, so the
        expansion reproduces the slab polynomial to roundoff.
        """
        from .polyquad import legendre_basis

        deg = self.degree
        rule = gauss_rule(deg + 1)
        leg = legendre_basis(deg)
        vals = self.eval_on_slab(n, rule.nodes)
        scaled = (2.0 * np.arange(deg + 1) + 1.0)[:, None] * (
            (leg.eval_matrix(rule.nodes) * rule.weights[:, None]).T @ vals
        )
        return scaled

    def to_csv(self, path) -> None:
        """One row per slab per coefficient vector; see README for the layout."""
        with open(path, "w") as fh:
            fh.write("# meshfunction-csv v1\n")
            fh.write(
                f"# T={self.mesh.T!r} N={self.mesh.N} degree={self.degree} "
                f"dim={self.dim} continuous={int(self.continuous)}\n"
            )
            fh.write("# ref_nodes=" + ",".join(repr(float(x)) for x in self.ref_nodes) + "\n")
            cols = ",".join(f"c{i}" for i in range(self.dim))
            fh.write(f"slab,node,tau,t,{cols}\n")
            row0 = ",".join(repr(float(x)) for x in self.value_at_zero)
            fh.write(f"-1,0,0.0,0.0,{row0}\n")
            for n in range(self.mesh.N):
                for j, tau in enumerate(self.ref_nodes):
                    t = self.mesh.times_on_slab(n, tau)
                    row = ",".join(repr(float(x)) for x in self.values[n, j])
                    fh.write(f"{n},{j},{tau!r},{float(t)!r},{row}\n")

    @classmethod
    def from_csv(cls, path) -> "MeshFunction":
        with open(path) as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0] != "# meshfunction-csv v1":
            raise ValueError("not a meshfunction CSV file")
        meta = dict(item.split("=", 1) for item in lines[1][2:].split())
        ref_nodes = np.array([float(x) for x in lines[2].split("=", 1)[1].split(",")])
        T, N = float(meta["T"]), int(meta["N"])
        dim, continuous = int(meta["dim"]), bool(int(meta["continuous"]))
        mesh = TimeMesh(T=T, N=N)
        values = np.zeros((N, ref_nodes.size, dim))
        value_at_zero = np.zeros(dim)
        for line in lines[4:]:
            parts = line.split(",")
            n, j = int(parts[0]), int(parts[1])
            vec = np.array([float(x) for x in parts[4:]])
            if n == -1:
                value_at_zero = vec
            else:
                values[n, j] = vec
        return cls(mesh, ref_nodes, values, continuous=continuous, value_at_zero=value_at_zero)


@dataclass
class SlabFunction:
    """Adapter giving slab-local evaluation semantics to arbitrary data.

    ``fn(n, taus)`` must return values of shape (len(taus), d) on slab n.
    Used to form pointwise combinations (differences, operator images)
    that the norm routines can integrate slab by slab.
    """

    mesh: TimeMesh
    fn: Callable[[int, np.ndarray], np.ndarray]

    def eval_on_slab(self, n: int, taus) -> np.ndarray:
        return self.fn(n, np.atleast_1d(np.asarray(taus, dtype=float)))


def from_callable(mesh: TimeMesh, fn) -> SlabFunction:
    """Wrap a vectorized time function fn(t_array) -> (m, d) for slab evaluation."""
    return SlabFunction(mesh, lambda n, taus: np.asarray(fn(mesh.times_on_slab(n, taus)), dtype=float))


@dataclass(frozen=True)
class NormSpec:
    """Exponent and state-space norm for time norms.

    p may be any value in [1, inf]; operations tied to parabolic
    stability additionally require 1 < p < inf and say so. The state
    norm is Euclidean or a weighted-diagonal variant
    ||v||_X^2 = sum_i w_i v_i^2.
    """

    p: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        if not (self.p >= 1.0):
            raise ValueError(f"norm exponent must satisfy p >= 1, got {self.p}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(w <= 0):
                raise ValueError("diagonal norm weights must be positive")
            object.__setattr__(self, "weights", w)

    @property
    def is_inf(self) -> bool:
        return np.isinf(self.p)

    def require_parabolic(self):
        if not (1.0 < self.p < np.inf):
            raise ValueError(f"this quantity requires an exponent in (1, inf), got p={self.p}")

    def xnorm_many(self, vals: np.ndarray) -> np.ndarray:
        """State-space norms of rows of vals, shape (m, d) -> (m,)."""
        if self.weights is None:
            return np.sqrt(np.einsum("md,md->m", vals, vals))
        return np.sqrt(np.einsum("md,d,md->m", vals, self.weights, vals))

    def cache_key(self):
        wk = None if self.weights is None else self.weights.tobytes()
        return (self.p, wk)


def _as_slab_evaluable(v, mesh):
    if hasattr(v, "eval_on_slab"):
        return getattr(v, "mesh", mesh) or mesh, v
    if callable(v):
        if mesh is None:
            raise ValueError("a mesh is required to integrate a bare callable")
        return mesh, from_callable(mesh, v)
    raise TypeError(f"cannot integrate object of type {type(v)!r}")


def _composite_points(panels: int, points: int):
    rule = gauss_rule(points)
    offs = (np.arange(panels)[:, None] + rule.nodes[None, :]) / panels
    wts = np.tile(rule.weights / panels, panels)
    return offs.ravel(), wts


def lp_norm_prefixes(v, spec: NormSpec, mesh: TimeMesh | None = None,
                     panels: int = DEFAULT_PANELS, points: int = DEFAULT_POINTS) -> np.ndarray:
    """Lp((0, t_m]; X) norms for every mesh point t_1 .. t_N at once.

    Composite Gauss quadrature (panels x points per slab) of the p-th
    power of the state norm; for p = inf, the running maximum over the
    quadrature samples.
    """
    mesh, ev = _as_slab_evaluable(v, mesh)
    taus, wts = _composite_points(panels, points)
    per_slab = np.empty(mesh.N)
    for n in range(mesh.N):
        phi = spec.xnorm_many(ev.eval_on_slab(n, taus))
        per_slab[n] = phi.max() if spec.is_inf else mesh.k * (wts @ phi**spec.p)
    if spec.is_inf:
        return np.maximum.accumulate(per_slab)
    return np.cumsum(per_slab) ** (1.0 / spec.p)


def lp_norm(v, spec: NormSpec, mesh: TimeMesh | None = None, t_end: float | None = None,
            panels: int = DEFAULT_PANELS, points: int = DEFAULT_POINTS) -> float:
    """Continuous Lp((0, t_end]; X) norm; t_end must be a mesh point (default T)."""
    mesh, _ = _as_slab_evaluable(v, mesh)
    prefixes = lp_norm_prefixes(v, spec, mesh, panels=panels, points=points)
    m = mesh.N if t_end is None else mesh.mesh_point_index(t_end)
    if m == 0:
        return 0.0
    return float(prefixes[m - 1])


def _discrete_values(v, tableau, mesh):
    if isinstance(v, MeshFunction):
        scale = max(np.max(np.abs(v.values)), 1e-300)
        if np.max(np.abs(v.value_at_zero)) > 1e-10 * scale:
            raise ValueError("discrete lp norm is defined for functions vanishing at t=0")
        return v.mesh, lambda n: v.eval_on_slab(n, tableau.c)
    mesh, ev = _as_slab_evaluable(v, mesh)
    return mesh, lambda n: ev.eval_on_slab(n, tableau.c)


def discrete_lp_norm_prefixes(v, spec: NormSpec, tableau: RadauTableau,
                              mesh: TimeMesh | None = None) -> np.ndarray:
    """Radau-point lp norms over (0, t_m] for every mesh point at once.

    The m-th entry is (sum_{l<m} k sum_i ||v(t_l + c_i k)||_X^p)^(1/p),
    evaluated exactly (no quadrature).
    """
    mesh, stage_values = _discrete_values(v, tableau, mesh)
    per_slab = np.empty(mesh.N)
    for n in range(mesh.N):
        phi = spec.xnorm_many(stage_values(n))
        per_slab[n] = phi.max() if spec.is_inf else mesh.k * np.sum(phi**spec.p)
    if spec.is_inf:
        return np.maximum.accumulate(per_slab)
    return np.cumsum(per_slab) ** (1.0 / spec.p)


def discrete_lp_norm(v, spec: NormSpec, tableau: RadauTableau,
                     mesh: TimeMesh | None = None, t_end: float | None = None) -> float:
    """Radau-point lp norm over (0, t_end]; requires v(0) = 0 for mesh functions."""
    if isinstance(v, MeshFunction):
        mesh = v.mesh
    elif mesh is None and hasattr(v, "mesh"):
        mesh = v.mesh
    prefixes = discrete_lp_norm_prefixes(v, spec, tableau, mesh)
    m = mesh.N if t_end is None else mesh.mesh_point_index(t_end)
    if m == 0:
        return 0.0
    return float(prefixes[m - 1])


def backward_difference(v: MeshFunction) -> MeshFunction:
    """The scaled difference t -> (v(t) - v(t - k)) / k, with v = 0 before t = 0.

    Slab polynomials are differenced against the previous slab at equal
    reference coordinates (the slab before t = 0 being the zero
    polynomial), so the output lives on the same node set and degree.
    """
    k = v.mesh.k
    vals = np.empty_like(v.values)
    vals[0] = v.values[0] / k
    if v.mesh.N > 1:
        vals[1:] = (v.values[1:] - v.values[:-1]) / k
    scale = max(np.max(np.abs(v.values)), np.max(np.abs(v.value_at_zero)), 1e-300)
    vanishes_at_zero = np.max(np.abs(v.value_at_zero)) <= 1e-14 * scale
    return MeshFunction(
        v.mesh,
        v.ref_nodes,
        vals,
        continuous=v.continuous and vanishes_at_zero,
        value_at_zero=v.value_at_zero / k,
    )
