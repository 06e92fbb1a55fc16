"""Append-only run log and deterministic artifact writers."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__

__all__ = ["RunRecord", "append_record", "read_records", "clean", "write_json",
           "write_csv", "append_jsonl", "read_jsonl", "now_iso", "RUNS_FILE"]

RUNS_FILE = "runs.jsonl"


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def clean(obj):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
        return obj
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if hasattr(obj, "value") and not isinstance(obj, (str, int)):
        return obj.value
    return obj


@dataclass
class RunRecord:
    config_hash: str
    command: str
    version: str = __version__
    started: str = field(default_factory=now_iso)
    finished: str | None = None
    artifact_dir: str | None = None
    outputs: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    exit_code: int | None = None

    def to_dict(self) -> dict:
        return clean(asdict(self))


def append_record(root: Path, rec: RunRecord) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    path = root / RUNS_FILE
    with open(path, "a") as fh:
        fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
    return path


def read_records(root: Path) -> list[dict]:
    return read_jsonl(root / RUNS_FILE)


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(clean(obj), indent=2, sort_keys=True) + "\n")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def append_jsonl(path: Path, obj) -> None:
    with open(path, "a") as fh:
        fh.write(json.dumps(clean(obj), sort_keys=True) + "\n")


def read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    out = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError:
            # a torn final line from an interrupted write
            continue
    return out
