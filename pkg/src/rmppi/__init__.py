import configparser
import logging
import os
from pathlib import Path

logger = logging.getLogger(__name__)

__version__ = "0.1.0"

# define default configurations

default_configurations = {
    "app": {
        "debug": "false",
        "log_level": "INFO",
    },
    "paths": {
        "output_dir": "runs",
        "track_dir": "tracks",
    },
    "planner": {
        "diagnostics": "false",
    },
}

config = configparser.ConfigParser()
config.read_dict(default_configurations)

# load configuration file if exists
config_dir = Path(os.environ.get("RMPPI_CONFIG_DIR", Path.home() / ".config" / "rmppi"))
config_file = config_dir / "config.ini"
if config_file.exists():
    config.read(config_file)
    logger.info(f"Loaded configuration from {config_file}")

logger.setLevel(config.get("app", "log_level", fallback="INFO"))
