"""Distance-and-angle multiple access with frequency diverse arrays."""

__version__ = "0.1.0"

from .array import (
    ArrayGeometry,
    OffsetPlan,
    OffsetScheme,
    PolarLocation,
    beampattern,
    correlation,
    correlation_mean,
    correlation_sq_approx,
    correlation_var,
    generate_offsets,
    sa,
    steering_rx,
    steering_tx,
    steering_tx_baseband,
    zero_plan,
)
from .errors import ConfigError, FldmaError, PreconditionError, RankDeficientError
from .scenario import Scenario
