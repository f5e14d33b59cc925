"""C-V2X Mode 4 sidelink simulator with DCC, packet dropping and RRI adaptive congestion control."""

from .config import RunConfig, dump_config, load_config, parse_config
from .errors import ConfigError, SchedulingError
from .presets import PRESETS, get_preset, list_presets
from .sim import RunResult, Simulation, simulate

__version__ = "0.1.0"

__all__ = ["RunConfig", "RunResult", "Simulation", "simulate", "parse_config", "load_config",
           "dump_config", "ConfigError", "SchedulingError", "PRESETS", "get_preset", "list_presets"]
