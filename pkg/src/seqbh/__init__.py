"""Sequential Benjamini-Hochberg procedures for multiple data streams.

The full procedure stops each stream early to accept or to reject while
controlling both the false discovery and false nondiscovery rates; the
rejective procedure only stops early to reject.
"""
from .errors import (
    ConfigError,
    DomainError,
    LadderError,
    NotPositiveDefinite,
    NumericalError,
    SeqBHError,
    StreamUnderrun,
    UsageError,
)
from .ladders import (
    CriticalLadder,
    RejectiveLadder,
    Standardizer,
    build_full_standardizer,
    build_rejective_standardizer,
)
from .procedure import (
    ACCEPT,
    REJECT,
    Decision,
    ProcedureRunner,
    ProcedureState,
    StepOutcome,
    rejective_step,
    run_procedure,
    sbh_step,
)
from .simulation import (
    COVARIANCES,
    ExperimentConfig,
    McReport,
    StreamModelSpec,
    cholesky_factor,
    delta_factor,
    fixed_sample_bh,
    fixed_sample_pvalue,
    generate_step,
    run_monte_carlo,
)
from .statistics import (
    BinomialModel,
    GlrSpec,
    GLRAccumulator,
    LLRAccumulator,
    NormalModel,
    SimpleTestSpec,
    TwoSampleBinomialAccumulator,
    TwoSampleBinomialSpec,
    WaldConfig,
    bernoulli_natural,
    calibrate_ladder_mc,
    fractional_levels,
    glr_statistics,
    kl_info,
    llr_increment,
    rejective_llr_ladder,
    sbh_wald_ladder,
    signed_root,
    two_sample_binomial_glr,
    wald_ab,
)

__all__ = [
    "ACCEPT",
    "bernoulli_natural",
    "BinomialModel",
    "build_full_standardizer",
    "build_rejective_standardizer",
    "calibrate_ladder_mc",
    "cholesky_factor",
    "ConfigError",
    "COVARIANCES",
    "CriticalLadder",
    "Decision",
    "delta_factor",
    "DomainError",
    "ExperimentConfig",
    "fixed_sample_bh",
    "fixed_sample_pvalue",
    "fractional_levels",
    "generate_step",
    "glr_statistics",
    "GLRAccumulator",
    "GlrSpec",
    "kl_info",
    "LadderError",
    "llr_increment",
    "LLRAccumulator",
    "McReport",
    "NormalModel",
    "NotPositiveDefinite",
    "NumericalError",
    "ProcedureRunner",
    "ProcedureState",
    "REJECT",
    "rejective_llr_ladder",
    "rejective_step",
    "RejectiveLadder",
    "run_monte_carlo",
    "run_procedure",
    "sbh_step",
    "sbh_wald_ladder",
    "SeqBHError",
    "signed_root",
    "SimpleTestSpec",
    "Standardizer",
    "StepOutcome",
    "StreamModelSpec",
    "StreamUnderrun",
    "two_sample_binomial_glr",
    "TwoSampleBinomialAccumulator",
    "TwoSampleBinomialSpec",
    "UsageError",
    "wald_ab",
    "WaldConfig",
]

__version__ = "0.1.0"
