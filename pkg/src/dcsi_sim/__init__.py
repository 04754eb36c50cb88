"""Simulator for cooperative network MIMO downlink precoding under
distributed CSI with hierarchical information exchange."""

from .scenario import (CovarianceSet, Scenario, assemble_covariances,
                       build_default_scenario, link_covariance,
                       steering_vector)
from .stochastics import (RNG_ALGORITHM, ChannelDraw, ConditionalGaussian,
                          RngStream, conditional_estimate_given_estimate,
                          conditional_h_given_estimate, psd_factor,
                          sample_channel, sample_conditional,
                          sample_estimates)
from .precoding import (NetworkPrecoder, PrecoderBlock, assemble, rzf_block,
                        sum_rate)
from .strategies import (StrategyEngine, StrategySpec, TeamDecision,
                         alpha_globally_robust, alpha_locally_robust,
                         alpha_naive, alpha_optimal_2tx, run_team)
from .feedback import (Codebook, PowerSplit, build_codebook, feedback_bits,
                       quantize, run_feedback_tradeoff)

__version__ = "0.1.0"
