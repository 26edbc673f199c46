"""Result files: locked writes, CSV/JSON tables, run manifests and gnuplot scripts."""

import csv
import fcntl
import io
import json
import logging
import os
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from pydantic import BaseModel, Field

import settings

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def write_with_lock(filepath: Union[str, Path], content: str, max_attempts: int = settings.LOCK_ATTEMPTS,
                    retry_delay: float = settings.LOCK_RETRY_DELAY) -> Path:
    """
    Write `content` to `filepath` while holding an exclusive lock on a sidecar .lock file.

    Raises:
        TimeoutError: when the lock stays taken for max_attempts tries
    """
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    lock_path = filepath.with_suffix(filepath.suffix + ".lock")

    attempt = 0
    while attempt < max_attempts:
        lock_file = open(lock_path, "w")
        acquired = False
        try:
            try:
                fcntl.flock(lock_file, fcntl.LOCK_EX | fcntl.LOCK_NB)
                acquired = True
                with open(filepath, "w", newline="") as f:
                    f.write(content)
                    f.flush()
                    os.fsync(f.fileno())
                logger.debug(f"Wrote {filepath}")
                return filepath
            except BlockingIOError:
                attempt += 1
                if attempt >= max_attempts:
                    raise TimeoutError(f"Could not acquire lock for {filepath} after {max_attempts} attempts")
                logger.warning(f"Lock on {filepath} held, retrying in {retry_delay}s (attempt {attempt}/{max_attempts})")
                time.sleep(retry_delay)
        finally:
            # release the lock and remove the sidecar
            if acquired:
                fcntl.flock(lock_file, fcntl.LOCK_UN)
                try:
                    os.remove(lock_path)
                except FileNotFoundError:
                    pass
            lock_file.close()
    raise TimeoutError(f"Could not acquire lock for {filepath}")


def _plain(value: Any) -> Any:
    """numpy scalars to Python scalars."""
    return value.item() if hasattr(value, "item") else value


def _cell(value: Any) -> Any:
    value = _plain(value)
    return repr(value) if isinstance(value, float) else value


def write_csv(filename: Union[str, Path], headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(headers)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return write_with_lock(filename, buffer.getvalue())


def write_json(filename: Union[str, Path], payload: Any) -> Path:
    return write_with_lock(filename, json.dumps(payload, indent=2, sort_keys=True, default=_plain) + "\n")


def write_table(out_dir: Union[str, Path], name: str, headers: Sequence[str], rows: Sequence[Sequence[Any]],
                fmt: str = "csv") -> Path:
    """Write one result table as <name>.csv or <name>.json (a list of records)."""
    out_dir = Path(out_dir)
    if fmt == "csv":
        return write_csv(out_dir / f"{name}.csv", headers, rows)
    if fmt == "json":
        records = [{h: _plain(v) for h, v in zip(headers, row)} for row in rows]
        return write_json(out_dir / f"{name}.json", records)
    raise ValueError(f"unknown output format '{fmt}'")


class RunManifest(BaseModel):
    command: str
    argv: List[str]
    model_path: Optional[str] = None
    parameters: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    tool_version: str = settings.TOOL_VERSION
    prng: str = settings.PRNG_NAME
    outputs: List[str] = Field(default_factory=list)

    def save(self, out_dir: Union[str, Path]) -> Path:
        return write_with_lock(Path(out_dir) / MANIFEST_NAME, self.model_dump_json(indent=2) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        return cls.model_validate_json(path.read_text())


def write_gnuplot(script_path: Union[str, Path], data_file: Union[str, Path], title: str, xlabel: str,
                  ylabel: str, columns: Sequence[int], labels: Sequence[str], style: str = "boxes",
                  logscale_y: bool = False) -> Path:
    """Gnuplot script plotting 1-based `columns` of a CSV against column 1."""
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
    ]
    if logscale_y:
        lines.append("set logscale y")
    if style == "boxes":
        lines.append("set style fill solid 0.5")
    plots = [f"'{Path(data_file).name}' using 1:{c} with {style} title '{label}'" for c, label in zip(columns, labels)]
    lines.append("plot " + ", \\\n     ".join(plots))
    return write_with_lock(script_path, "\n".join(lines) + "\n")
