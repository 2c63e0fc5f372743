from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

from errors import ConfigError
from util import atomic_write_text


log = logging.getLogger(__name__)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ConfigError("csv_shape", f"Row has {len(row)} cells, header has {len(header)}.")
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def meta_path(csv_path: Path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".meta.json")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]], meta: Dict[str, Any] | None = None) -> Path:
    path = Path(path)
    atomic_write_text(path, render_csv(header, rows))
    if meta is not None:
        atomic_write_text(meta_path(path), json.dumps(meta, indent=2, sort_keys=True, default=str))
    log.info("wrote %s", path)
    return path


def read_csv(path: Path) -> List[Dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise ConfigError("missing_file", f"No such CSV: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
