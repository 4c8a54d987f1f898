"""Slab-by-slab dG time stepping for u' + A(t) u = f.

Two solver paths are provided for the autonomous case and must agree to
solver tolerance: the Galerkin path assembles the variational slab system
(jump term included) against the Radau Lagrange basis; the Radau-averaged
path solves the q-stage Radau IIA equations with the forcing replaced by
its weighted slab averages. Their agreement is the standing oracle for
the assembly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve, LinAlgError

from .operators import OperatorModel, TimeDependentOperatorModel
from .polyquad import GaussRule, RadauTableau, gauss_rule
from .timefun import MeshFunction, TimeMesh


class StepFailureError(RuntimeError):
    """A slab system could not be solved; carries the offending slab index."""

    def __init__(self, slab: int, message: str):
        super().__init__(f"slab {slab}: {message}")
        self.slab = slab


@dataclass(frozen=True)
class QuadratureSettings:
    """Quadrature configuration for a solver run.

    f_points: Gauss points for forcing integrals (raised automatically if
    the forcing declares a polynomial degree that needs more). operator_points:
    Gauss points for the A(t) integrals of the nonautonomous path (default 2q).
    norm_panels/norm_points: composite rule used by downstream norm queries.
    """

    f_points: int = 10
    operator_points: int | None = None
    norm_panels: int = 16
    norm_points: int = 10


@dataclass
class ProblemSpec:
    """An initial value problem u' + A(t) u = f on (0, T].

    forcing maps an array of times to an (m, d) array (a scalar-time
    callable returning a d-vector is adapted automatically).
    f_poly_degree, when set, declares f piecewise-polynomial of that
    degree so forcing integrals are computed exactly.
    """

    operator: OperatorModel | TimeDependentOperatorModel
    forcing: callable
    u0: np.ndarray
    T: float
    f_poly_degree: int | None = None

    def __post_init__(self):
        self.u0 = np.asarray(self.u0, dtype=float)
        if self.T <= 0:
            raise ValueError("horizon T must be positive")
        if self.u0.shape != (self.operator.d,):
            raise ValueError("initial value dimension does not match the operator")

    @property
    def is_autonomous(self) -> bool:
        return isinstance(self.operator, OperatorModel)

    def eval_forcing(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.asarray(self.forcing(ts), dtype=float)
        if out.shape == (ts.size, self.operator.d):
            return out
        # scalar-time callable fallback
        return np.vstack([np.asarray(self.forcing(float(t)), dtype=float) for t in ts])


@dataclass
class DGSolution:
    """Stage values per slab plus the piecewise solution polynomial U.

    U has degree q-1 on the Radau node set, is discontinuous, and carries
    u0 as its value at t=0. stage_values[n, i] = U(t_n + c_i k).
    f_averages retains the weighted forcing averages used by the step for
    diagnostics (the collocation identity evaluates against them).
    """

    U: MeshFunction
    stage_values: np.ndarray
    solver_path: str
    quadrature: QuadratureSettings
    f_averages: np.ndarray
    tableau: RadauTableau

    @property
    def mesh(self) -> TimeMesh:
        return self.U.mesh

    @property
    def q(self) -> int:
        return self.tableau.q

    def export_f_averages(self, path) -> None:
        """CSV of the averaged forcing: one row per slab per stage, columns
        slab, stage, t_ni, then the vector components."""
        with open(path, "w") as fh:
            cols = ",".join(f"c{i}" for i in range(self.f_averages.shape[2]))
            fh.write(f"slab,stage,t,{cols}\n")
            for n in range(self.mesh.N):
                ts = self.mesh.times_on_slab(n, self.tableau.c)
                for i in range(self.q):
                    row = ",".join(repr(float(x)) for x in self.f_averages[n, i])
                    fh.write(f"{n},{i},{float(ts[i])!r},{row}\n")


def _f_rule(problem: ProblemSpec, tableau: RadauTableau, settings: QuadratureSettings) -> GaussRule:
    points = settings.f_points
    if problem.f_poly_degree is not None:
        # need exactness for f * l_i, degree f_poly_degree + q - 1
        needed = (problem.f_poly_degree + tableau.q) // 2 + 1
        points = max(points, needed)
    return gauss_rule(points)


def f_averages(forcing, mesh: TimeMesh, tableau: RadauTableau, rule: GaussRule) -> np.ndarray:
    """Weighted slab averages of the forcing against the Radau Lagrange basis.

    Returns shape (N, q, d) with entry (n, i) equal to
    int_{J_n} l_i f dt / int_{J_n} l_i dt. The denominators are the Radau
    weights (validated positive at tableau construction), so the averages
    are always well defined.
    """
    if not isinstance(forcing, ProblemSpec):
        # accept a bare callable for the module-level entry point
        ell = tableau.stage_basis.eval_matrix(rule.nodes)  # (G, q)
        weighted = ell * rule.weights[:, None]
        out = []
        for n in range(mesh.N):
            ts = mesh.times_on_slab(n, rule.nodes)
            fvals = np.atleast_2d(np.asarray(forcing(ts), dtype=float))
            out.append((weighted.T @ fvals) / tableau.b[:, None])
        return np.stack(out)
    problem = forcing
    ell = tableau.stage_basis.eval_matrix(rule.nodes)
    weighted = ell * rule.weights[:, None]
    out = np.empty((mesh.N, tableau.q, problem.operator.d))
    for n in range(mesh.N):
        fvals = problem.eval_forcing(mesh.times_on_slab(n, rule.nodes))
        out[n] = (weighted.T @ fvals) / tableau.b[:, None]
    return out


def _reference_matrices(tableau: RadauTableau):
    """Stiffness K[i,j] = int l_i l_j', mass M[i,j] = int l_i l_j, and the
    left-endpoint jump matrix, all on [0, 1]."""
    q = tableau.q
    basis = tableau.stage_basis
    rule = gauss_rule(q + 1)
    B = basis.eval_matrix(rule.nodes)
    Bp = basis.deriv_matrix(rule.nodes)
    K = (B * rule.weights[:, None]).T @ Bp
    M = (B * rule.weights[:, None]).T @ B
    ell0 = basis.eval_matrix([0.0])[0]
    J = np.outer(ell0, ell0)
    return K, M, J, ell0


def _finish(problem, mesh, tableau, stages, path, settings, favg) -> DGSolution:
    U = MeshFunction(mesh, tableau.c, stages, continuous=False, value_at_zero=problem.u0)
    return DGSolution(U=U, stage_values=U.values, solver_path=path,
                      quadrature=settings, f_averages=favg, tableau=tableau)


def solve_dg(problem: ProblemSpec, mesh: TimeMesh, tableau: RadauTableau,
             path: str = "galerkin", settings: QuadratureSettings | None = None) -> DGSolution:
    """Solve an autonomous problem with dG(q-1) on the given mesh.

    path selects the Galerkin slab assembly or the equivalent Radau IIA
    step with averaged forcing; both consume identical forcing integrals,
    so their stage values agree up to linear-algebra roundoff.
    """
    if not problem.is_autonomous:
        raise ValueError("solve_dg requires a constant operator; "
                         "use solve_dg_nonautonomous for time-dependent ones")
    if path not in ("galerkin", "radau-averaged"):
        raise ValueError(f"unknown solver path {path!r}")
    settings = settings or QuadratureSettings()
    op: OperatorModel = problem.operator
    q, d, k = tableau.q, op.d, mesh.k
    favg = f_averages(problem, mesh, tableau, _f_rule(problem, tableau, settings))

    K, M, J, ell0 = _reference_matrices(tableau)
    if path == "galerkin":
        solver = op.block_solver(K + J, k * M)
    else:
        solver = op.block_solver(np.eye(q), k * tableau.a)

    stages = np.empty((mesh.N, q, d))
    left = problem.u0
    for n in range(mesh.N):
        if path == "galerkin":
            rhs = k * tableau.b[:, None] * favg[n] + np.outer(ell0, left)
        else:
            rhs = left[None, :] + k * (tableau.a @ favg[n])
        try:
            stages[n] = solver.solve(rhs)
        except (LinAlgError, ValueError) as exc:
            raise StepFailureError(n, f"slab system solve failed ({exc})") from exc
        if not np.all(np.isfinite(stages[n])):
            raise StepFailureError(n, "slab system produced non-finite stage values")
        left = stages[n, -1]
    return _finish(problem, mesh, tableau, stages, path, settings, favg)


def solve_dg_nonautonomous(problem: ProblemSpec, mesh: TimeMesh, tableau: RadauTableau,
                           settings: QuadratureSettings | None = None) -> DGSolution:
    """Solve a nonautonomous problem, with the A(t) slab integrals
    approximated by a Gauss rule (default 2q points per slab).

    All operator-independent integrals remain exact; the quadrature on
    the A(t) terms realizes a quadrature variant of the scheme that
    preserves the order q of the underlying method.
    """
    if problem.is_autonomous:
        raise ValueError("operator is constant; use solve_dg")
    settings = settings or QuadratureSettings()
    op: TimeDependentOperatorModel = problem.operator
    q, d, k = tableau.q, op.d, mesh.k
    favg = f_averages(problem, mesh, tableau, _f_rule(problem, tableau, settings))

    K, M, J, ell0 = _reference_matrices(tableau)
    rule_a = gauss_rule(settings.operator_points or 2 * q)
    ell_a = tableau.stage_basis.eval_matrix(rule_a.nodes)  # (Ga, q)
    coeff = [w * np.outer(row, row) for w, row in zip(rule_a.weights, ell_a)]

    stages = np.empty((mesh.N, q, d))
    left = problem.u0
    eye_kron = np.kron(K + J, np.eye(d))
    for n in range(mesh.N):
        ts = mesh.times_on_slab(n, rule_a.nodes)
        block = eye_kron.copy()
        for C, t in zip(coeff, ts):
            block += k * np.kron(C, op.matrix_at(t))
        rhs = k * tableau.b[:, None] * favg[n] + np.outer(ell0, left)
        try:
            sol = lu_solve(lu_factor(block), rhs.reshape(q * d))
        except (LinAlgError, ValueError) as exc:
            raise StepFailureError(n, f"slab system solve failed ({exc})") from exc
        stages[n] = sol.reshape(q, d)
        if not np.all(np.isfinite(stages[n])):
            raise StepFailureError(n, "slab system produced non-finite stage values")
        left = stages[n, -1]
    return _finish(problem, mesh, tableau, stages, "galerkin", settings, favg)


def solve(problem: ProblemSpec, mesh: TimeMesh, tableau: RadauTableau,
          path: str = "galerkin", settings: QuadratureSettings | None = None) -> DGSolution:
    """Dispatch on the operator type (autonomous vs time-dependent)."""
    if problem.is_autonomous:
        return solve_dg(problem, mesh, tableau, path=path, settings=settings)
    return solve_dg_nonautonomous(problem, mesh, tableau, settings=settings)
