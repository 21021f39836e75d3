"""CSV/JSON emitters and readers.

Floats are written with ``repr`` so every value parses back to the identical
double.  No timestamps or host details are written, keeping outputs
byte-identical for identical inputs.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import __version__
from .trace import CurrentTrace


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):  # numpy scalar
        return _cell(v.item())
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    return rows[0], rows[1:]


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def write_json(path: Path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return path


def read_json(path: Path) -> Any:
    return json.loads(Path(path).read_text())


def sidecar_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_sidecar(path: Path, cfg_hash: str, seed: int, **extra) -> Path:
    meta = {"config_hash": cfg_hash, "seed": seed, "artifact_version": __version__}
    meta.update(extra)
    return write_json(sidecar_path(path), meta)


TRACE_HEADER = ("time_s", "current_A")


def write_trace_csv(path: Path, trace: CurrentTrace) -> Path:
    return write_csv(path, TRACE_HEADER, zip(trace.times.tolist(), trace.samples.tolist()))


def read_trace_csv(path: Path) -> CurrentTrace:
    """Read a trace back; timing and width come from the sidecar when present."""
    header, rows = read_csv(path)
    if tuple(header) != TRACE_HEADER:
        raise ValueError(f"{path}: expected header {','.join(TRACE_HEADER)}")
    times = [float(r[0]) for r in rows]
    samples = [float(r[1]) for r in rows]
    meta_path = sidecar_path(path)
    if meta_path.exists():
        meta = read_json(meta_path)
        return CurrentTrace(samples, meta["sample_rate"], meta.get("t0", times[0]),
                            meta.get("width"), meta.get("driver"))
    if len(times) < 2:
        raise ValueError(f"{path}: cannot infer sample rate from a single sample")
    return CurrentTrace(samples, 1.0 / (times[1] - times[0]), times[0])


HISTOGRAM_HEADER = ("bin_low", "bin_high", "count")


def read_histogram_csv(path: Path) -> list[tuple[float, float, int]]:
    header, rows = read_csv(path)
    if tuple(header) != HISTOGRAM_HEADER:
        raise ValueError(f"{path}: expected header {','.join(HISTOGRAM_HEADER)}")
    return [(float(a), float(b), int(c)) for a, b, c in rows]


def read_matrix_csv(path: Path) -> list[dict]:
    """Defense-matrix rows with numeric columns converted; empty cells become None."""
    header, rows = read_csv(path)
    ints = {"width", "states"}
    text = {"scheme", "driver"}
    out = []
    for r in rows:
        rec = {}
        for k, v in zip(header, r):
            if k in text:
                rec[k] = v
            elif v == "":
                rec[k] = None
            elif k in ints:
                rec[k] = int(v)
            else:
                rec[k] = float(v)
        out.append(rec)
    return out
