"""Spatial operator models: apply, shifted solves, and slab block solves.

Everything is a dense matrix at desk scale (d up to a few thousand);
slab systems are solved by LU with the factorization cached per
coefficient-matrix pair, so autonomous time stepping factors once per run.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve


class ModelRejectedError(ValueError):
    """Raised when a constructed operator fails its spectrum validation."""


class _BlockSolver:
    """LU-backed solver for (M kron I_d + S kron A) X = rhs, rhs of shape (q, d)."""

    def __init__(self, matrix: np.ndarray, q: int, d: int):
        self.q, self.d = q, d
        self.lu = lu_factor(matrix)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        out = lu_solve(self.lu, np.asarray(rhs, dtype=float).reshape(self.q * self.d))
        return out.reshape(self.q, self.d)


def assemble_block(M: np.ndarray, S: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Dense assembly of M kron I + S kron A."""
    d = A.shape[0]
    return np.kron(M, np.eye(d)) + np.kron(S, A)


class OperatorModel:
    """A constant spatial operator A on R^d.

    Supplies ``apply``/``apply_many``, shifted solves of
    (alpha I + beta A) x = rhs, and cached block solvers for the
    q*d slab systems of the time stepper.
    """

    def __init__(self, matrix, symmetric: bool | None = None, meta: dict | None = None):
        A = np.asarray(matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("operator matrix must be square")
        self.matrix = A.copy()
        self.matrix.setflags(write=False)
        if symmetric is None:
            symmetric = bool(np.allclose(A, A.T, rtol=1e-12, atol=1e-12))
        self.symmetric = symmetric
        self.meta = dict(meta or {})
        self._cache: dict = {}
        self._lock = threading.Lock()

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)

    def apply_many(self, X) -> np.ndarray:
        """Row-wise application, (m, d) -> (m, d)."""
        return np.asarray(X, dtype=float) @ self.matrix.T

    def solve_shifted(self, alpha: float, beta: float, rhs) -> np.ndarray:
        """Solve (alpha I + beta A) x = rhs, with the factorization cached."""
        key = ("shift", float(alpha), float(beta))
        with self._lock:
            lu = self._cache.get(key)
            if lu is None:
                lu = lu_factor(alpha * np.eye(self.d) + beta * self.matrix)
                self._cache[key] = lu
        return lu_solve(lu, np.asarray(rhs, dtype=float))

    def block_solver(self, M, S) -> _BlockSolver:
        """Cached solver for (M kron I + S kron A); M, S are q x q."""
        M = np.asarray(M, dtype=float)
        S = np.asarray(S, dtype=float)
        key = ("block", M.tobytes(), S.tobytes(), M.shape[0])
        with self._lock:
            solver = self._cache.get(key)
            if solver is None:
                solver = _BlockSolver(assemble_block(M, S, self.matrix), M.shape[0], self.d)
                self._cache[key] = solver
        return solver


def laplacian_1d(d: int, diffusion: float = 1.0) -> OperatorModel:
    """Dirichlet finite-difference Laplacian on (0, 1) with d interior points.

    A = -diffusion * (second difference) / h^2, h = 1/(d+1); symmetric
    positive definite with eigenvalues 4 sin^2(j pi h / 2) * diffusion / h^2.
    """
    if d < 1:
        raise ValueError("interior point count must be >= 1")
    if diffusion <= 0:
        raise ValueError("diffusion must be positive")
    h = 1.0 / (d + 1)
    A = (np.diag(np.full(d, 2.0)) - np.diag(np.ones(d - 1), 1) - np.diag(np.ones(d - 1), -1))
    A *= diffusion / h**2
    eig = 4.0 * diffusion / h**2 * np.sin(np.array([1, d]) * np.pi * h / 2.0) ** 2
    return OperatorModel(A, symmetric=True, meta={
        "kind": "laplacian_1d", "h": h, "diffusion": diffusion,
        "min_eig": float(eig[0]), "max_eig": float(eig[1]),
    })


def nonnormal_model(d: int, skew: float) -> OperatorModel:
    """Tridiagonal SPD stencil plus skew * (upper shift); validated to have
    spectrum in the open right half-plane, else a ModelRejectedError."""
    if d < 2:
        raise ValueError("nonnormal model needs dimension >= 2")
    A = np.diag(np.full(d, 2.0)) - np.diag(np.ones(d - 1), 1) - np.diag(np.ones(d - 1), -1)
    A += skew * np.diag(np.ones(d - 1), 1)
    eigs = np.linalg.eigvals(A)
    if np.min(eigs.real) <= 0:
        raise ModelRejectedError(
            f"spectrum validation failed: min real part {np.min(eigs.real):.3e} <= 0"
        )
    return OperatorModel(A, meta={"kind": "nonnormal", "skew": skew, "min_re_eig": float(np.min(eigs.real))})


def matrix_from_text(path) -> OperatorModel:
    """Load a user-supplied operator from the dense text format.

    Line 1 holds the dimension d; each of the next d lines holds d
    whitespace-separated entries of one matrix row.
    """
    with open(path) as fh:
        tokens = fh.read().split("\n")
    tokens = [line for line in tokens if line.strip()]
    if not tokens:
        raise ValueError("empty matrix file")
    d = int(tokens[0])
    if len(tokens) != d + 1:
        raise ValueError(f"matrix file declares d={d} but has {len(tokens) - 1} rows")
    rows = [np.array([float(x) for x in line.split()]) for line in tokens[1:]]
    A = np.vstack(rows)
    if A.shape != (d, d):
        raise ValueError(f"matrix rows have wrong length for d={d}")
    return OperatorModel(A, meta={"kind": "matrix-file", "path": str(path)})


def matrix_to_text(model: OperatorModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{model.d}\n")
        for row in model.matrix:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


@dataclass
class TimeDependentOperatorModel:
    """A time-dependent operator family A(t) = a(t) * base + B(t).

    ``lipschitz_bound`` and ``equivalence_bound`` are declared constants
    for the family (slope of t -> A(t) against ||A(0) v||, and the mutual
    norm-equivalence constant of the A(t)); they are sanity-checked by
    sampling at construction, with a warning on violation.
    """

    base: OperatorModel
    modulation: callable
    drift: callable | None = None
    lipschitz_bound: float = 0.0
    equivalence_bound: float | None = None
    horizon: float = 1.0

    @property
    def d(self) -> int:
        return self.base.d

    def matrix_at(self, t: float) -> np.ndarray:
        A = float(self.modulation(t)) * self.base.matrix
        if self.drift is not None:
            A = A + np.asarray(self.drift(t), dtype=float)
        return A

    def apply_at(self, t: float, x) -> np.ndarray:
        return self.matrix_at(t) @ np.asarray(x, dtype=float)

    def apply_at_many(self, ts, X) -> np.ndarray:
        """Apply A(t_m) to row m of X, (m, d) -> (m, d)."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        X = np.asarray(X, dtype=float)
        if self.drift is None:
            mod = np.array([float(self.modulation(t)) for t in ts])
            return mod[:, None] * (X @ self.base.matrix.T)
        return np.vstack([self.matrix_at(t) @ X[i] for i, t in enumerate(ts)])

    def frozen(self, t: float) -> OperatorModel:
        """The constant operator A(t) for a fixed t."""
        return OperatorModel(self.matrix_at(t))


def nonautonomous_model(base: OperatorModel, modulation, drift=None, *,
                        lipschitz_bound: float, equivalence_bound: float | None = None,
                        horizon: float = 1.0, probes: int = 8, seed: int = 0,
                        ) -> TimeDependentOperatorModel:
    """Build A(t) = a(t) * base + B(t) with declared stability constants.

    The modulation must stay positive on [0, horizon] (validation error
    otherwise). The declared Lipschitz bound L is spot-checked on random
    probe vectors against ||(A(t) - A(s)) v|| <= 1.05 * L |t - s| ||A(0) v||;
    violations warn but do not fail, since L is the caller's declaration.
    If no equivalence bound is declared, the sampled extreme ratio of the
    modulation is used (exact when there is no drift).
    """
    ts = np.linspace(0.0, horizon, 33)
    mods = np.array([float(modulation(t)) for t in ts])
    if np.any(mods <= 0):
        raise ValueError("modulation must be strictly positive on [0, horizon]")
    if equivalence_bound is None:
        equivalence_bound = float(mods.max() / mods.min())
        if drift is not None:
            warnings.warn("equivalence bound estimated from the modulation only; "
                          "declare one explicitly when a drift is present")
    model = TimeDependentOperatorModel(
        base=base, modulation=modulation, drift=drift,
        lipschitz_bound=lipschitz_bound, equivalence_bound=equivalence_bound,
        horizon=horizon,
    )
    rng = np.random.default_rng(seed)
    A0 = model.matrix_at(0.0)
    for _ in range(probes):
        v = rng.standard_normal(base.d)
        t, s = rng.uniform(0.0, horizon, size=2)
        lhs = np.linalg.norm((model.matrix_at(t) - model.matrix_at(s)) @ v)
        ref = np.linalg.norm(A0 @ v)
        if lhs > 1.05 * lipschitz_bound * abs(t - s) * ref + 1e-12:
            warnings.warn(
                f"declared Lipschitz bound {lipschitz_bound} violated on a probe "
                f"(|t-s|={abs(t - s):.3f}, ratio={lhs / (abs(t - s) * ref + 1e-300):.3f})"
            )
            break
    return model
