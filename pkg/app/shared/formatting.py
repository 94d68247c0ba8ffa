"""Shared output formatting.

Every emitted file follows the same standards:

- CSV: one ``# config_hash=<hex>`` header line, then a pandas table with
  17 significant digits, '.' decimal separator, LF line endings, no index
- JSON: pydantic documents, two-space indent, trailing newline
- Identical frames and hashes give byte-identical files
"""

from pathlib import Path

import pandas as pd
from pydantic import BaseModel

from app.core.logging import get_logger

logger = get_logger(__name__)

FLOAT_FORMAT = "%.17g"
HASH_PREFIX = "# config_hash="

# ====================
# CSV
# ====================


def csv_text(frame: pd.DataFrame, config_hash: str) -> str:
    """Render a frame as CSV text with the config-hash header.

    Examples:
        >>> csv_text(pd.DataFrame({"t": [0.1]}), "abc")
        '# config_hash=abc\\nt\\n0.10000000000000001\\n'
    """
    body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return f"{HASH_PREFIX}{config_hash}\n{body}"


def write_csv(frame: pd.DataFrame, path: Path, config_hash: str) -> Path:
    """Write a frame to ``path``, creating parent directories.

    Returns:
        The written path.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(csv_text(frame, config_hash))
    logger.info("output.csv_written", path=str(path), rows=len(frame))
    return path


def read_csv(path: Path) -> tuple[str, pd.DataFrame]:
    """Read a file written by write_csv.

    Returns:
        Tuple of (config hash, frame).
    """
    with path.open(encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        if not header.startswith(HASH_PREFIX):
            raise ValueError(f"{path} has no config_hash header")
        frame = pd.read_csv(handle, float_precision="round_trip")
    return header.removeprefix(HASH_PREFIX), frame


# ====================
# JSON
# ====================


def json_text(document: BaseModel) -> str:
    return document.model_dump_json(indent=2) + "\n"


def write_json(document: BaseModel, path: Path) -> Path:
    """Write a pydantic document to ``path``, creating parent directories."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json_text(document), encoding="utf-8", newline="\n")
    logger.info("output.json_written", path=str(path))
    return path
