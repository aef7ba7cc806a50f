from .config import Config, load_config, resolve_config, update_config
from .official_configs import DebugConfig

__all__ = ["Config", "DebugConfig", "load_config", "resolve_config", "update_config"]
