"""Discontinuous Galerkin time discretization of linear parabolic systems.

Library layout:

- ``polyquad``: Radau nodes/tableau, Lagrange and Legendre bases, Gauss rules
- ``timefun``: time meshes, piecewise polynomial functions, Lp / discrete lp norms
- ``operators``: spatial operator models (constant and time dependent)
- ``dgsolve``: the slab-by-slab dG time stepper and its Radau-averaged twin
- ``reconinterp``: the continuous reconstruction and the orthogonal interpolant
- ``estimate``: residuals, two-sided error bounds, stability-ratio diagnostics
- ``harness`` / ``cli``: experiment driver (convergence sweeps, rate fits, CSV)
"""

from .dgsolve import (
    DGSolution,
    ProblemSpec,
    QuadratureSettings,
    StepFailureError,
    f_averages,
    solve,
    solve_dg,
    solve_dg_nonautonomous,
)
from .estimate import (
    MaxRegReport,
    Residual,
    aposteriori_bounds,
    aposteriori_prefix_table,
    maxreg_report,
    residual,
)
from .operators import (
    ModelRejectedError,
    OperatorModel,
    TimeDependentOperatorModel,
    laplacian_1d,
    matrix_from_text,
    nonautonomous_model,
    nonnormal_model,
)
from .polyquad import (
    GaussRule,
    LagrangeBasis,
    LegendreBasis,
    RadauTableau,
    gauss_rule,
    lagrange_basis,
    legendre_basis,
    radau_tableau,
)
from .reconinterp import (
    OrthoInterpolant,
    Reconstruction,
    hat_tilde,
    ortho_interpolate,
    reconstruct,
)
from .timefun import (
    MeshFunction,
    NormSpec,
    SlabFunction,
    TimeMesh,
    backward_difference,
    discrete_lp_norm,
    discrete_lp_norm_prefixes,
    lp_norm,
    lp_norm_prefixes,
)

__version__ = "0.1.0"

__all__ = [
    "DGSolution",
    "GaussRule",
    "LagrangeBasis",
    "LegendreBasis",
    "MaxRegReport",
    "MeshFunction",
    "ModelRejectedError",
    "NormSpec",
    "OperatorModel",
    "OrthoInterpolant",
    "ProblemSpec",
    "QuadratureSettings",
    "RadauTableau",
    "Reconstruction",
    "Residual",
    "SlabFunction",
    "StepFailureError",
    "TimeDependentOperatorModel",
    "TimeMesh",
    "aposteriori_bounds",
    "aposteriori_prefix_table",
    "backward_difference",
    "discrete_lp_norm",
    "discrete_lp_norm_prefixes",
    "f_averages",
    "gauss_rule",
    "hat_tilde",
    "lagrange_basis",
    "laplacian_1d",
    "legendre_basis",
    "lp_norm",
    "lp_norm_prefixes",
    "matrix_from_text",
    "maxreg_report",
    "nonautonomous_model",
    "nonnormal_model",
    "ortho_interpolate",
    "radau_tableau",
    "reconstruct",
    "residual",
    "solve",
    "solve_dg",
    "solve_dg_nonautonomous",
    "__version__",
]
