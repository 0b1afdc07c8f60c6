"""Limit-distribution toolkit for the branching process of m-ary search trees.

The package computes the spectral data of the replacement dynamics,
simulates the composition-vector chain and its continuous-time embedding,
solves the associated smoothing fixed-point equation by population dynamics,
characteristic-function iteration and weighted-replication cascades, derives
the moment tables and the generalized-series ODE identity, and provides
density/support diagnostics for the complex limit variable.
"""

from .spectral import (
    SpectralData,
    char_poly_eval,
    eigen_data,
    eigenvalues,
    lambda2_of,
)
from .treesim import (
    CompositionVector,
    EmbeddedRun,
    LimitEstimates,
    ct_jump_times,
    ct_simulate,
    dt_simulate,
    dt_step,
    estimate_limits,
    key_insertion_oracle,
    martingale_connection_test,
)
from .fixpoint import (
    CharGrid,
    SamplePool,
    TSampler,
    apply_K,
    char_iteration,
    d2star,
    iterate_to_fixpoint,
    laplace_T,
    sample_T,
)
from .cascade import CascadeConfig, cascade_sample, exp_moment_probe, variance_limit
from .moments import GenSeries, MomentTable, moment_table, ode_check
from .analysis import (
    PsiProfile,
    SupportMap,
    psi_profile,
    spiral_density,
    support_coverage,
)

__all__ = [
    "SpectralData", "char_poly_eval", "eigenvalues", "lambda2_of", "eigen_data",
    "CompositionVector", "EmbeddedRun", "LimitEstimates", "dt_step", "dt_simulate",
    "key_insertion_oracle", "ct_jump_times", "ct_simulate", "estimate_limits",
    "martingale_connection_test",
    "TSampler", "SamplePool", "CharGrid", "sample_T", "laplace_T", "apply_K",
    "iterate_to_fixpoint", "d2star", "char_iteration",
    "CascadeConfig", "cascade_sample", "variance_limit", "exp_moment_probe",
    "MomentTable", "GenSeries", "moment_table", "ode_check",
    "PsiProfile", "SupportMap", "psi_profile", "support_coverage", "spiral_density",
]

__version__ = "0.1.0"
