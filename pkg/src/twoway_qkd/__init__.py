"""Two-way classical post-processing for quantum key distribution.

A numerical toolkit covering the exact error-rate recursions of two-way
distillation rounds, convergence thresholds with a terminal asymmetric CSS
stage, secret-key-rate formulas, and seeded Monte Carlo validation with
attack baselines.
"""

from .channel import (
    DeltaCoords,
    PauliChannelParams,
    SIMPLEX_TOL,
    bb84_family,
    sixstate_channel,
)
from .convergence import (
    StepSequence,
    ThresholdResult,
    Trajectory,
    WorstCaseScan,
    css_key_fraction,
    evolve,
    find_threshold,
    optimize_sequence,
    parse_sequence,
    worst_case_scan,
)
from .keyrates import (
    BoundsTable,
    KeyRateReport,
    NumericalError,
    binary_entropy,
    bounds_table,
    inamori_bb84_rate,
    inamori_sixstate_rate,
    rate_threshold,
    shor_preskill_rate,
    two_way_net_rate,
)
from .montecarlo import (
    AttackReport,
    EmpiricalRates,
    FlagEnsemble,
    Protocol2Report,
    estimate_rates,
    intercept_resend,
    mc_b_step,
    mc_bx_step,
    mc_p_step,
    sample_flags,
    simulate_protocol2_bits,
)
from .steps import (
    DegenerateStepError,
    ProtocolClassError,
    StepKind,
    StepOutcome,
    b_step,
    b_step_delta,
    bx_step,
    enumerate_step_exact,
    p_step,
    p_step_delta,
)

__all__ = [
    "AttackReport",
    "BoundsTable",
    "DegenerateStepError",
    "DeltaCoords",
    "EmpiricalRates",
    "FlagEnsemble",
    "KeyRateReport",
    "NumericalError",
    "PauliChannelParams",
    "Protocol2Report",
    "ProtocolClassError",
    "SIMPLEX_TOL",
    "StepKind",
    "StepOutcome",
    "StepSequence",
    "ThresholdResult",
    "Trajectory",
    "WorstCaseScan",
    "b_step",
    "b_step_delta",
    "bb84_family",
    "binary_entropy",
    "bounds_table",
    "bx_step",
    "css_key_fraction",
    "enumerate_step_exact",
    "estimate_rates",
    "evolve",
    "find_threshold",
    "inamori_bb84_rate",
    "inamori_sixstate_rate",
    "intercept_resend",
    "mc_b_step",
    "mc_bx_step",
    "mc_p_step",
    "optimize_sequence",
    "p_step",
    "p_step_delta",
    "parse_sequence",
    "rate_threshold",
    "sample_flags",
    "shor_preskill_rate",
    "simulate_protocol2_bits",
    "sixstate_channel",
    "two_way_net_rate",
    "worst_case_scan",
]

__version__ = "0.1.0"
