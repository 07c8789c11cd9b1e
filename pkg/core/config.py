"""
Parameter Loading
=================

Loads config/params_supertask.yaml and applies environment overrides.
SUPERTASK_CAP may lower the enumeration cap but never raise it.
"""

import logging
import os
from fractions import Fraction
from pathlib import Path
from typing import Dict, Optional, Union

import yaml
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_DIR = Path(__file__).parent.parent / "config"
PARAMS_FILE = "params_supertask.yaml"
CAP_ENV_VAR = "SUPERTASK_CAP"
HARD_CAP = 10


def load_params(config_path: Optional[Union[str, Path]] = None) -> Dict:
    """
    Load lab parameters from YAML.

    Args:
        config_path: Directory holding params_supertask.yaml, or the file itself

    Returns:
        Parameter dictionary with the enumeration cap already env-adjusted
    """
    path = Path(config_path) if config_path is not None else DEFAULT_CONFIG_DIR
    if path.is_dir():
        path = path / PARAMS_FILE

    load_dotenv()

    with open(path, 'r') as f:
        params = yaml.safe_load(f)

    params['enumeration']['cap'] = effective_cap(params['enumeration'].get('cap', HARD_CAP))

    logger.info(f"Configuration loaded from {path}")
    return params


def effective_cap(configured: int = HARD_CAP) -> int:
    """Return the enumeration cap after the SUPERTASK_CAP override."""
    cap = min(int(configured), HARD_CAP)

    raw = os.getenv(CAP_ENV_VAR)
    if raw:
        try:
            requested = int(raw)
        except ValueError:
            logger.warning(f"Ignoring non-integer {CAP_ENV_VAR}={raw!r}")
            return cap
        if requested > cap:
            logger.warning(f"{CAP_ENV_VAR}={requested} cannot raise the cap above {cap}")
        elif requested >= 1:
            cap = requested

    return cap


def parse_fraction(value: Union[str, int, float, Fraction]) -> Fraction:
    """
    Parse "num/den", an integer, or a decimal string into an exact Fraction.

    Floats are converted through their decimal repr so that 0.9 becomes 9/10.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(str(value).strip())


def fraction_str(value: Fraction) -> str:
    """Lowest-terms "num/den" rendering used in every exact output field."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"
