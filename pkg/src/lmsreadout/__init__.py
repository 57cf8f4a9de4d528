"""LMS adaptive noise cancellation for repeated-pulse readout chains."""
from .arith import FixedConfig, QFormat, Rounding
from .chain import RunConfig, RunReport, SyncConfig, run, sweep
from .lms import LmsConfig, LmsFilter
from .signal import ChannelModel, ConfigError, Frame, PulseSpec

__all__ = [
    "ChannelModel", "ConfigError", "FixedConfig", "Frame", "LmsConfig", "LmsFilter",
    "PulseSpec", "QFormat", "Rounding", "RunConfig", "RunReport", "SyncConfig", "run", "sweep",
]
__version__ = "0.1.0"
