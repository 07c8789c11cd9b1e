"""
Artifact Files
==============

Versioned flat files written by the CLI:
- chain.json   {"format_version": 1, "added": [...]}, canonical and compact
- trace.csv    k, count, density_num, density_den
- report.json  nested report with "num/den" strings in exact fields
- counts.csv   ball, count, frequency (Monte Carlo)

Writing a parsed chain.json reproduces the file byte for byte.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import pandas as pd
import yaml

from core.chain.events import (EventSpec, chain_from_json, chain_to_json, event_from_json,
                               target_from_json)
from core.chain.prefix import ChainPrefix, TargetSet
from core.errors import DomainError, ManifestError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

PathLike = Union[str, Path]


def serialize_chain(chain: ChainPrefix) -> str:
    payload = {'format_version': FORMAT_VERSION, **chain_to_json(chain)}
    return json.dumps(payload, separators=(',', ':')) + "\n"


def parse_chain(text: str) -> ChainPrefix:
    data = json.loads(text)
    _check_version(data, "chain")
    return chain_from_json(data)


def write_chain(chain: ChainPrefix, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_chain(chain))
    logger.info(f"Chain of length {len(chain)} written to {path}")
    return path


def read_chain(path: PathLike) -> ChainPrefix:
    return parse_chain(_read(path))


def read_target(source: str) -> TargetSet:
    """Target from inline JSON or a JSON file path."""
    return target_from_json(_load_json_arg(source))


def read_event(source: str) -> EventSpec:
    """Event from inline JSON or a JSON file path."""
    return event_from_json(_load_json_arg(source))


def write_trace(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.info(f"Trace with {len(frame)} rows written to {path}")
    return path


def write_report(report: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {'format_version': FORMAT_VERSION, **report}
    path.write_text(json.dumps(payload, indent=2) + "\n")
    logger.info(f"Report written to {path}")
    return path


def write_counts(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def load_manifest_data(path: PathLike) -> Dict[str, Any]:
    """Raw manifest mapping from a YAML or JSON file."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"Manifest {path} does not exist")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ManifestError(f"Manifest {path} is not valid YAML/JSON: {e}") from e
    if not isinstance(data, dict):
        raise ManifestError(f"Manifest {path} must be a mapping")
    _check_version(data, "manifest", error=ManifestError)
    return data


def _check_version(data: Dict[str, Any], what: str, error=DomainError) -> None:
    version = data.get('format_version', FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise error(f"Unsupported {what} format version {version} (expected {FORMAT_VERSION})")


def _read(path: PathLike) -> str:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"File {path} does not exist")
    return path.read_text()


def _load_json_arg(source: str) -> Dict[str, Any]:
    text = source.strip()
    if not text.startswith('{'):
        text = _read(text)
    return json.loads(text)
