"""Multi-group multicast beamforming via superiorized projection methods.

The public surface re-exports the space primitives, constraint
projections, perturbations, solvers, and evaluation metrics; the CLI in
:mod:`pocsbeam.cli` drives the same functions.
"""

from .hilbert import (
    SpectralDecomposition,
    axpy,
    eig_hermitian,
    inner,
    norm,
    svd_hermitian,
    symmetrize,
    zeros,
)
from .constraints import (
    ConstraintCache,
    ProblemInstance,
    Residuals,
    objective,
    prepare,
    project_power,
    project_psd,
    project_sinr,
    relax,
    residuals,
    t_star,
)
from .perturb import (
    perturbation,
    project_rank_one,
    rank_distance,
    shrink,
    sigma_max,
    t_power,
)
from .solve import (
    OracleConfig,
    SdrEstimate,
    SolverConfig,
    SolverTrace,
    estimate_sdr_optimum,
    extract_beamformer,
    pocs_solve,
    spocs_solve,
)
from .scenario import (
    derive_seed,
    generate_instance,
    min_scaled_sinr,
    per_user_sinr,
    scale_factor,
)

__version__ = "0.1.0"

__all__ = [
    "SpectralDecomposition",
    "axpy",
    "eig_hermitian",
    "inner",
    "norm",
    "svd_hermitian",
    "symmetrize",
    "zeros",
    "ConstraintCache",
    "ProblemInstance",
    "Residuals",
    "objective",
    "prepare",
    "project_power",
    "project_psd",
    "project_sinr",
    "relax",
    "residuals",
    "t_star",
    "perturbation",
    "project_rank_one",
    "rank_distance",
    "shrink",
    "sigma_max",
    "t_power",
    "OracleConfig",
    "SdrEstimate",
    "SolverConfig",
    "SolverTrace",
    "estimate_sdr_optimum",
    "extract_beamformer",
    "pocs_solve",
    "spocs_solve",
    "derive_seed",
    "generate_instance",
    "min_scaled_sinr",
    "per_user_sinr",
    "scale_factor",
    "__version__",
]
