"""MCMC for models with intractable normalizing constants.

The heavy lifting happens in the compiled extension: simulate networks or
point patterns, build importance-sampling particle tables, fit Gaussian
process emulators of the log normalizing constant or log likelihood, and run
the emulated (normem / likem) or auxiliary-draw (dmh) samplers.  The pipeline
stages of the command-line tool are also callable through `run_stage`.
"""

from ._core import (
    GpEmulator,
    NumericalError,
    ValidationError,
    __version__,
    ergm_mple,
    ergm_stats,
    ess,
    exact_logz_ergm,
    hpd,
    interaction_phi,
    is_log_z_ergm,
    kde_curve,
    kde_tv,
    latin_hypercube,
    mcse_batch_means,
    precompute_table_ergm,
    precompute_table_pointproc,
    run_dmh_ergm,
    run_dmh_pointproc,
    run_likem,
    run_normem_ergm,
    run_normem_pointproc,
    run_stage,
    simulate_ergm,
    simulate_pointproc,
    solve_breakpoints,
    summarize,
)

__all__ = [
    "GpEmulator",
    "NumericalError",
    "ValidationError",
    "__version__",
    "ergm_mple",
    "ergm_stats",
    "ess",
    "exact_logz_ergm",
    "hpd",
    "interaction_phi",
    "is_log_z_ergm",
    "kde_curve",
    "kde_tv",
    "latin_hypercube",
    "mcse_batch_means",
    "precompute_table_ergm",
    "precompute_table_pointproc",
    "run_dmh_ergm",
    "run_dmh_pointproc",
    "run_likem",
    "run_normem_ergm",
    "run_normem_pointproc",
    "run_stage",
    "simulate_ergm",
    "simulate_pointproc",
    "solve_breakpoints",
    "summarize",
]
