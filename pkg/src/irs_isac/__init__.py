"""Link-level simulator and closed-form analytics for IRS-aided mmWave
sensing and communication with beam scanning and beam splitting."""

from .scenario import Scenario, ScenarioError, dbm_to_watts, load_config, spatial_direction, validate_scenario
from .array import beam_kernel, cancellation_project, steering, steering_derivative
from .channel import ChannelSet, PathGains, assemble_channels, path_gains, target_snr
from .scanning import Codebook, ScanRecord, achievable_rate, dft_codebook, simulate_phase1, undetectable_region
from .estimation import EstimationError, EstimationResult, mle_phase1, mle_whole, objective_trace
from .analytics import (
    AnalyticsReport,
    analyze,
    crb_phase1_closed,
    crb_whole,
    fim_crb_general,
    mse_predict,
    no_outlier_prob,
    thresholds,
)
from .strategy import (
    StrategyDecision,
    decide_strategy,
    element_allocation,
    simulate_phase2,
    split_gain,
    split_reflection,
)

__version__ = "0.1.0"
