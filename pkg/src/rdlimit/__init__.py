"""Rate-distortion limit analysis for transform coding systems."""
from .channel import (ChannelParams, ChannelRealization, MCEstimate, apply_channel,
                      mc_mutual_information, per_sample_distortion, scaling_factor)
from .context import ContextModel, ContextModelSpec, fit_context, predict_mean, residual_rate
from .correlation import (CorrelatedPair, correlation_overestimate, mc_rate_correlated,
                          rate_correlated, rate_independent)
from .exceptions import (ConvergenceError, EstimationError, InfiniteRateError,
                         InternalConsistencyError, InvalidArgumentError, NumericalError,
                         PGMParseError, RDLimitError)
from .gaussian_rd import (GaussianSource, RatePair, argmin_model_variance,
                          expected_code_length, rate_gap_curve, rate_gaussian,
                          rate_uniform_quantizer, shannon_gap_constant)
from .pipeline import (PipelineConfig, RDCurve, RDLimitSimulator, RDPoint,
                       component_ablation, run_once, run_sweep, uniform_baseline)
from .transforms import (BlockTransform, LatentGrid, TransformSpec, analyze, fit_klt,
                         mse, synthesize)
from .waterfill import Allocation, SourceSpec, allocation_rate, reverse_water_fill

__version__ = "0.1.0"
