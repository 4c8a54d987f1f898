"""Reconstruction and interpolation operators on the time mesh.

``reconstruct`` lifts a degree q-1 piecewise polynomial w to the
continuous degree-q interpolant through the left endpoint value and the
Radau-node values of each slab. ``ortho_interpolate`` builds the degree
q-1 interpolant matching a function at right endpoints and orthogonal to
polynomials of degree <= q-2 on each slab; ``hat_tilde`` composes the two.
Applied to the dG stage polynomial, the reconstruction coincides with the
collocation polynomial of the Radau step with averaged forcing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polyquad import gauss_rule, legendre_basis, radau_tableau
from .timefun import MeshFunction, TimeMesh


@dataclass
class Reconstruction:
    """A continuous degree-q reconstruction together with its source."""

    hatU: MeshFunction
    source: object


def reconstruct(w: MeshFunction, w0=None) -> Reconstruction:
    """Continuous degree-(q) interpolant of a degree-(q-1) mesh function.

    Per slab, interpolates the left limit of w at t_n (w0 at t = 0)
    together with the values of w at the q Radau points. The output is
    continuous by construction and carries w0 as its value at zero.
    """
    q = w.degree + 1
    tableau = radau_tableau(q)
    if w0 is None:
        w0 = w.value_at_zero
    w0 = np.asarray(w0, dtype=float)
    nodes = np.concatenate([[0.0], tableau.c])
    vals = np.empty((w.mesh.N, q + 1, w.dim))
    left = w0
    for n in range(w.mesh.N):
        radau_vals = w.eval_on_slab(n, tableau.c)
        vals[n, 0] = left
        vals[n, 1:] = radau_vals
        left = radau_vals[-1]
    hat = MeshFunction(w.mesh, nodes, vals, continuous=True, value_at_zero=w0)
    return Reconstruction(hatU=hat, source=w)


@dataclass
class OrthoInterpolant:
    """Degree-(q-1) interpolant with per-slab Legendre coefficients v_0..v_{q-2}."""

    tildeU: MeshFunction
    legendre_coeffs: np.ndarray


def _slab_samples(u, mesh, taus):
    """Sample u (callable of time, or MeshFunction-like) slab by slab."""
    if hasattr(u, "eval_on_slab"):
        return lambda n: u.eval_on_slab(n, taus)
    return lambda n: np.atleast_2d(np.asarray(u(mesh.times_on_slab(n, taus)), dtype=float))


def _value_at_zero(u, dim):
    if hasattr(u, "eval_on_slab"):
        return np.asarray(u.value_at_zero, dtype=float)
    v0 = np.asarray(u(np.array([0.0])), dtype=float).reshape(-1)
    if v0.size != dim:
        raise ValueError("could not infer the value at t=0")
    return v0


def ortho_interpolate(u, mesh: TimeMesh, q: int, points: int | None = None) -> OrthoInterpolant:
    """Slabwise interpolant of u: exact at right endpoints, orthogonal to
    polynomials of degree <= q-2 on each slab (no condition for q = 1).

    In the shifted-Legendre basis the orthogonality fixes coefficients
    0..q-2 as the L2 projections v_i, and the endpoint condition fixes the
    leading coefficient as u(t_{n+1}) - sum v_i, since every shifted
    Legendre polynomial equals 1 at the right endpoint. Projections are
    computed with a Gauss rule of ``points`` nodes (default q + 4), which
    is exact whenever u is piecewise polynomial of degree <= 2*points-1-(q-2).
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    G = points or q + 4
    rule = gauss_rule(max(G, 1))
    tableau = radau_tableau(q)
    leg = legendre_basis(q - 1)
    # sample quadrature nodes and the right endpoint in one pass
    taus = np.concatenate([rule.nodes, [1.0]])
    sample = _slab_samples(u, mesh, taus)
    proj = (2.0 * np.arange(q - 1) + 1.0)[:, None] * (
        (leg.eval_matrix(rule.nodes)[:, : q - 1] * rule.weights[:, None]).T
    )  # (q-1, G)
    nodal_map = leg.eval_matrix(tableau.c)  # (q, q)

    first = sample(0)
    dim = first.shape[1]
    coeffs = np.empty((mesh.N, max(q - 1, 0), dim))
    vals = np.empty((mesh.N, q, dim))
    for n in range(mesh.N):
        block = first if n == 0 else sample(n)
        uq, uend = block[:-1], block[-1]
        v = proj @ uq if q > 1 else np.zeros((0, dim))
        coeffs[n] = v
        lead = uend - v.sum(axis=0)
        full = np.vstack([v, lead[None, :]])
        vals[n] = nodal_map @ full
    tilde = MeshFunction(mesh, tableau.c, vals, continuous=False,
                         value_at_zero=_value_at_zero(u, dim))
    return OrthoInterpolant(tildeU=tilde, legendre_coeffs=coeffs)


def hat_tilde(u, mesh: TimeMesh, q: int, points: int | None = None) -> MeshFunction:
    """The continuous degree-q composition reconstruct(ortho_interpolate(u)).

    Reproduces continuous piecewise polynomials of degree <= q exactly.
    The value of u at t = 0 seeds the reconstruction; it must be
    available (MeshFunction value_at_zero, or the callable at 0).
    """
    ti = ortho_interpolate(u, mesh, q, points=points)
    return reconstruct(ti.tildeU, w0=ti.tildeU.value_at_zero).hatU
