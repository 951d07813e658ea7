"""CSV tables with a one-line `# pyaev key=value ...` metadata header"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple, Union

import pandas as pd

from .errors import ProfileParseError, ReportError

logger = logging.getLogger('pyaev.tables')

HEADER_PREFIX = "# pyaev"


def format_header(digest: Optional[str] = None, **meta) -> str:
    fields = {}
    if digest is not None:
        fields['digest'] = digest
    fields.update({k: v for k, v in meta.items() if v is not None})
    spaced = [k for k, v in fields.items() if any(c.isspace() for c in str(v))]
    if spaced:
        raise ReportError(f"header values of {spaced} contain whitespace")
    return " ".join([HEADER_PREFIX] + [f"{k}={v}" for k, v in fields.items()])


def parse_header(line: str) -> Dict[str, str]:
    if not line.startswith(HEADER_PREFIX):
        return {}
    meta = {}
    for token in line[len(HEADER_PREFIX):].split():
        key, sep, value = token.partition("=")
        if sep:
            meta[key] = value
    return meta


def write_table(frame: pd.DataFrame, path: Union[str, Path],
                digest: Optional[str] = None, **meta) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with path.open('w', encoding='utf-8', newline='') as fh:
            if digest is not None or meta:
                fh.write(format_header(digest, **meta) + "\n")
            frame.to_csv(fh, index=False, float_format='%.17g', lineterminator="\n")
    except OSError as e:
        raise ReportError(f"cannot write {path}: {e}") from e
    logger.debug("wrote %s (%d rows)", path, len(frame))
    return path


def read_header(path: Union[str, Path]) -> Dict[str, str]:
    with Path(path).open('r', encoding='utf-8') as fh:
        return parse_header(fh.readline().rstrip("\n"))


def _leading_comments(path: Path) -> int:
    """Number of `#` lines before the column header; a `#` inside a cell is data"""
    count = 0
    with path.open('r', encoding='utf-8') as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            count += 1
    return count


def read_table(path: Union[str, Path], required: Iterable[str] = (),
               dtype: Optional[Dict[str, object]] = None) -> Tuple[pd.DataFrame, Dict[str, str]]:
    """Read a table, checking that every required column is present"""
    path = Path(path)
    if not path.exists():
        raise ProfileParseError(f"{path} does not exist")
    try:
        frame = pd.read_csv(path, skiprows=_leading_comments(path), skipinitialspace=True, dtype=dtype)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ProfileParseError(f"{path}: {e}") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    for column in required:
        if column not in frame.columns:
            raise ProfileParseError(f"{path.name}: missing column", column=column)
    return frame, read_header(path)
