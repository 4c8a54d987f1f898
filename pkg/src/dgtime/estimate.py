"""Residuals, two-sided error bounds, and stability-ratio diagnostics.

The residual R(t) = hatU'(t) + A(t) hatU(t) - f(t) of the reconstruction
is computable from the numerical solution and the data alone. Its Lp norm
bounds the combined error ||(u - hatU)'|| + ||A(u - hatU)|| from below
exactly (triangle inequality on the error equation) and from above up to
a stability constant that is reported empirically as an effectivity ratio.
With vanishing initial value, the stability ratio report collects the
norms whose boundedness by ||f|| expresses the scheme's parabolic
stability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dgsolve import DGSolution, ProblemSpec
from .operators import TimeDependentOperatorModel
from .reconinterp import Reconstruction
from .timefun import (
    NormSpec,
    SlabFunction,
    TimeMesh,
    backward_difference,
    discrete_lp_norm_prefixes,
    lp_norm_prefixes,
)

ZERO_EFFECTIVITY = 1.0  # convention: effectivity of an identically zero residual


def apply_operator(op, g, mesh: TimeMesh) -> SlabFunction:
    """Slabwise t -> A(t) g(t) for a constant or time-dependent operator."""
    if isinstance(op, TimeDependentOperatorModel):
        def fn(n, taus):
            return op.apply_at_many(mesh.times_on_slab(n, taus), g.eval_on_slab(n, taus))
    else:
        def fn(n, taus):
            return op.apply_many(g.eval_on_slab(n, taus))
    return SlabFunction(mesh, fn)


def slab_difference(mesh: TimeMesh, a, b) -> SlabFunction:
    """Slabwise a(t) - b(t) for slab-evaluable or vectorized-callable inputs."""
    def to_eval(x):
        if hasattr(x, "eval_on_slab"):
            return x.eval_on_slab
        return lambda n, taus: np.atleast_2d(np.asarray(x(mesh.times_on_slab(n, taus)), dtype=float))
    ea, eb = to_eval(a), to_eval(b)
    return SlabFunction(mesh, lambda n, taus: ea(n, taus) - eb(n, taus))


class Residual:
    """R(t) = hatU'(t) + A(t) hatU(t) - f(t), evaluable slab by slab.

    Norm queries go through the composite-quadrature Lp machinery and are
    cached per (norm spec, prefix).
    """

    def __init__(self, sol: DGSolution, recon: Reconstruction, problem: ProblemSpec,
                 panels: int | None = None, points: int | None = None):
        if recon.hatU.mesh is not sol.mesh and (
            recon.hatU.mesh.N != sol.mesh.N or recon.hatU.mesh.T != sol.mesh.T
        ):
            raise ValueError("reconstruction and solution live on different meshes")
        self.sol = sol
        self.recon = recon
        self.problem = problem
        self.panels = panels if panels is not None else sol.quadrature.norm_panels
        self.points = points if points is not None else sol.quadrature.norm_points
        self._norm_cache: dict = {}

    @property
    def mesh(self) -> TimeMesh:
        return self.sol.mesh

    def eval_on_slab(self, n: int, taus) -> np.ndarray:
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        hat = self.recon.hatU
        out = hat.deriv_on_slab(n, taus)
        ts = self.mesh.times_on_slab(n, taus)
        op = self.problem.operator
        if isinstance(op, TimeDependentOperatorModel):
            out += op.apply_at_many(ts, hat.eval_on_slab(n, taus))
        else:
            out += op.apply_many(hat.eval_on_slab(n, taus))
        return out - self.problem.eval_forcing(ts)

    def stage_residuals(self) -> np.ndarray:
        """hatU'(t_ni) + A hatU(t_ni) - f_ni per slab and stage, shape (N, q, d).

        For the autonomous scheme this vanishes to solver tolerance: the
        reconstruction is the collocation polynomial of the averaged-f
        Radau step.
        """
        tab = self.sol.tableau
        out = np.empty_like(self.sol.f_averages)
        hat = self.recon.hatU
        op = self.problem.operator
        for n in range(self.mesh.N):
            vals = hat.deriv_on_slab(n, tab.c)
            if isinstance(op, TimeDependentOperatorModel):
                vals = vals + op.apply_at_many(self.mesh.times_on_slab(n, tab.c),
                                               hat.eval_on_slab(n, tab.c))
            else:
                vals = vals + op.apply_many(hat.eval_on_slab(n, tab.c))
            out[n] = vals - self.sol.f_averages[n]
        return out

    def norm_prefixes(self, spec: NormSpec) -> np.ndarray:
        key = spec.cache_key()
        if key not in self._norm_cache:
            self._norm_cache[key] = lp_norm_prefixes(
                self, spec, self.mesh, panels=self.panels, points=self.points
            )
        return self._norm_cache[key]

    def norm(self, spec: NormSpec, t_end: float | None = None) -> float:
        m = self.mesh.N if t_end is None else self.mesh.mesh_point_index(t_end)
        if m == 0:
            return 0.0
        return float(self.norm_prefixes(spec)[m - 1])


def residual(sol: DGSolution, recon: Reconstruction, problem: ProblemSpec,
             panels: int | None = None, points: int | None = None) -> Residual:
    """Residual of the reconstruction against the problem data."""
    return Residual(sol, recon, problem, panels=panels, points=points)


@dataclass
class AposterioriBounds:
    """Outcome of the two-sided residual comparison on one prefix.

    lower_ok: the residual norm does not exceed the error sum (up to
    1e-6 relative slack for quadrature noise). upper_ratio: the empirical
    stability constant error_sum / resid_norm, reported as 1 when both
    vanish.
    """

    lower_ok: bool
    upper_ratio: float
    error_sum: float
    resid_norm: float


def _error_prefix_arrays(resid: Residual, exact, exact_deriv, spec: NormSpec):
    mesh = resid.mesh
    hat = resid.recon.hatU
    op = resid.problem.operator
    ederiv = slab_difference(
        mesh, exact_deriv, SlabFunction(mesh, lambda n, taus: hat.deriv_on_slab(n, taus))
    )
    e = slab_difference(mesh, exact, hat)
    a_e = apply_operator(op, e, mesh)
    kw = dict(panels=resid.panels, points=resid.points)
    return (
        lp_norm_prefixes(ederiv, spec, mesh, **kw),
        lp_norm_prefixes(a_e, spec, mesh, **kw),
    )


def _roundoff_floor(resid: Residual) -> float:
    """Norm level below which residual and error are treated as identically
    zero (the exact-reproduction degenerate case); scaled to the data."""
    return 1e-11 * (1.0 + float(np.max(np.abs(resid.sol.f_averages)))
                    + float(np.max(np.abs(resid.sol.stage_values))))


def aposteriori_bounds(resid: Residual, exact, exact_deriv, spec: NormSpec,
                       t_end: float | None = None) -> AposterioriBounds:
    """Compare the residual norm against the true reconstruction-error sum.

    exact/exact_deriv are the manufactured solution and its derivative as
    vectorized callables (or slab-evaluable objects). t_end must be a mesh
    point; defaults to T. When both quantities sit at the roundoff floor
    (exactly reproduced solutions) the effectivity is 1 by convention.
    """
    spec.require_parabolic()
    mesh = resid.mesh
    m = mesh.N if t_end is None else mesh.mesh_point_index(t_end)
    if m == 0:
        raise ValueError("prefix must contain at least one slab")
    dpref, apref = _error_prefix_arrays(resid, exact, exact_deriv, spec)
    esum = float(dpref[m - 1] + apref[m - 1])
    rnorm = float(resid.norm_prefixes(spec)[m - 1])
    if max(esum, rnorm) <= _roundoff_floor(resid):
        return AposterioriBounds(True, ZERO_EFFECTIVITY, esum, rnorm)
    lower_ok = rnorm <= esum * (1.0 + 1e-6)
    ratio = esum / rnorm
    return AposterioriBounds(lower_ok, ratio, esum, rnorm)


def aposteriori_prefix_table(resid: Residual, exact, exact_deriv, spec: NormSpec) -> dict:
    """Residual and error-sum prefixes for every mesh point t_1 .. t_N.

    Returns arrays: t, resid, err_deriv, err_A, effectivity, lower_ok.
    """
    spec.require_parabolic()
    dpref, apref = _error_prefix_arrays(resid, exact, exact_deriv, spec)
    rpref = resid.norm_prefixes(spec)
    esum = dpref + apref
    floor = _roundoff_floor(resid)
    degenerate = np.maximum(esum, rpref) <= floor
    with np.errstate(divide="ignore", invalid="ignore"):
        eff = np.where(degenerate, ZERO_EFFECTIVITY, esum / np.maximum(rpref, 1e-300))
    lower = degenerate | (rpref <= esum * (1.0 + 1e-6))
    return {
        "t": resid.mesh.grid[1:].copy(),
        "resid": rpref,
        "err_deriv": dpref,
        "err_A": apref,
        "effectivity": eff,
        "lower_ok": lower,
    }


@dataclass
class MaxRegReport:
    """Prefix norms of the stability quantities for a zero-initial-value run.

    Arrays are indexed by the mesh-point prefixes t_1 .. t_N (or the
    subset requested): the Radau-point norm of the backward difference of
    the reconstruction, the Lp norms of hatU', A hatU and A U, the Lp norm
    of the forcing, and the ratio of the sum of the first four to the last.
    """

    t: np.ndarray
    dk_hat: np.ndarray
    hat_deriv: np.ndarray
    a_hat: np.ndarray
    a_u: np.ndarray
    f_norm: np.ndarray
    ratio: np.ndarray
    degenerate: bool

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t_m,dk_hatU,hatU_prime,A_hatU,A_U,f_norm,ratio\n")
            for i in range(self.t.size):
                row = [self.t[i], self.dk_hat[i], self.hat_deriv[i],
                       self.a_hat[i], self.a_u[i], self.f_norm[i], self.ratio[i]]
                fh.write(",".join(repr(float(x)) for x in row) + "\n")


def maxreg_report(sol: DGSolution, recon: Reconstruction, problem: ProblemSpec,
                  spec: NormSpec, prefixes: str = "all") -> MaxRegReport:
    """Stability-ratio diagnostics; requires a vanishing initial value.

    For a time-dependent operator the frozen operator A(t_m) is used in
    the prefix-(0, t_m] norms, so each prefix needs its own quadrature
    pass; ``prefixes="final"`` restricts to t_N for sweep workloads.
    """
    spec.require_parabolic()
    if np.max(np.abs(problem.u0)) != 0.0:
        raise ValueError("stability ratios are defined for vanishing initial value u0 = 0")
    mesh = sol.mesh
    hat = recon.hatU
    op = problem.operator
    kw = dict(panels=sol.quadrature.norm_panels, points=sol.quadrature.norm_points)

    dk = backward_difference(hat)
    dk_pref = discrete_lp_norm_prefixes(dk, spec, sol.tableau)
    hd_pref = lp_norm_prefixes(
        SlabFunction(mesh, lambda n, taus: hat.deriv_on_slab(n, taus)), spec, mesh, **kw)
    f_pref = lp_norm_prefixes(
        SlabFunction(mesh, lambda n, taus: problem.eval_forcing(mesh.times_on_slab(n, taus))),
        spec, mesh, **kw)

    ms = np.arange(1, mesh.N + 1) if prefixes == "all" else np.array([mesh.N])
    if isinstance(op, TimeDependentOperatorModel):
        a_hat = np.empty(ms.size)
        a_u = np.empty(ms.size)
        for j, m in enumerate(ms):
            frozen = op.frozen(mesh.grid[m])
            ah = lp_norm_prefixes(apply_operator(frozen, hat, mesh), spec, mesh, **kw)
            au = lp_norm_prefixes(apply_operator(frozen, sol.U, mesh), spec, mesh, **kw)
            a_hat[j] = ah[m - 1]
            a_u[j] = au[m - 1]
    else:
        a_hat = lp_norm_prefixes(apply_operator(op, hat, mesh), spec, mesh, **kw)[ms - 1]
        a_u = lp_norm_prefixes(apply_operator(op, sol.U, mesh), spec, mesh, **kw)[ms - 1]

    dk_m, hd_m, f_m = dk_pref[ms - 1], hd_pref[ms - 1], f_pref[ms - 1]
    lhs = dk_m + hd_m + a_hat + a_u
    degenerate = bool(f_pref[-1] == 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(f_m > 0, lhs / f_m, np.nan)
    return MaxRegReport(
        t=mesh.grid[ms].copy(), dk_hat=dk_m, hat_deriv=hd_m, a_hat=a_hat,
        a_u=a_u, f_norm=f_m, ratio=ratio, degenerate=degenerate,
    )


def write_error_table(path, table: dict, maxreg_ratio: np.ndarray | None = None) -> None:
    """CSV export of a prefix table: t_m, resid, err_deriv, err_A,
    effectivity, maxreg_ratio (blank-filled when not computed)."""
    n = table["t"].size
    ratios = maxreg_ratio if maxreg_ratio is not None else np.full(n, np.nan)
    with open(path, "w") as fh:
        fh.write("t_m,resid,err_deriv,err_A,effectivity,maxreg_ratio\n")
        for i in range(n):
            row = [table["t"][i], table["resid"][i], table["err_deriv"][i],
                   table["err_A"][i], table["effectivity"][i], ratios[i]]
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
