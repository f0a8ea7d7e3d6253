"""Canonical report serialization and run manifests.

Reports are JSON objects ``{"manifest": ..., "payload": ...}``. The payload
is serialized canonically: sorted keys, no whitespace variation, floats in
``%.12e``, complex numbers as ``[re, im]`` and arrays as nested lists. The
manifest carries the wall time, so replays compare payload bytes only.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np

from .errors import EncodingError

__all__ = ["RunManifest", "to_plain", "canonical_json", "config_hash", "emit_report", "write_atomic"]


def _float_token(x: float) -> Any:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return _Float(x)


class _Float(float):
    """A float that serializes with a fixed format."""

    def __repr__(self) -> str:
        return "%.12e" % float(self)


def to_plain(obj: Any) -> Any:
    """Convert numpy values, complex numbers and objects with ``to_json``."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float_token(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return [_float_token(float(obj.real)), _float_token(float(obj.imag))]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()] if obj.ndim else to_plain(obj.item())
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            if not isinstance(k, str):
                raise EncodingError(f"report keys must be strings, got {type(k).__name__}")
            out[k] = to_plain(v)
        return out
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if hasattr(obj, "to_json"):
        return to_plain(obj.to_json())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj) if not f.name.startswith("_")}
    raise EncodingError(f"cannot serialize object of type {type(obj).__name__}")


def _dump(obj: Any) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, _Float):
        return repr(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, list):
        return "[" + ",".join(_dump(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(json.dumps(k, ensure_ascii=False) + ":" + _dump(obj[k]) for k in sorted(obj)) + "}"
    raise EncodingError(f"cannot serialize object of type {type(obj).__name__}")


def canonical_json(payload: Any) -> str:
    """Canonical JSON text of a payload (``{}`` for an empty one)."""
    return _dump(to_plain(payload))


def config_hash(config: Any) -> str:
    """64-bit blake2b hash of the canonical JSON of a config, as 16 hex digits."""
    return hashlib.blake2b(canonical_json(config).encode("utf-8"), digest_size=8).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int
    tool_version: str
    wall_time_ms: int = 0
    argv: list[str] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


def _is_matrix_json(obj: Any) -> bool:
    return isinstance(obj, dict) and {"rows", "cols", "data"} <= set(obj)


def _matrix_rows(payload: Any) -> Optional[list[list[Any]]]:
    if isinstance(payload, np.ndarray) and payload.ndim == 2:
        arr = payload.astype(complex)
    elif _is_matrix_json(payload):
        r, c = int(payload["rows"]), int(payload["cols"])
        arr = np.array([complex(a, b) for a, b in payload["data"]]).reshape(r, c)
    else:
        return None
    return [[i, j, "%.12e" % arr[i, j].real, "%.12e" % arr[i, j].imag] for i in range(arr.shape[0]) for j in range(arr.shape[1])]


def emit_report(payload: Any, fmt: str = "json", manifest: Optional[RunManifest] = None) -> bytes:
    """Serialize a payload as canonical JSON or as CSV.

    JSON wraps the payload with its manifest when one is given. CSV writes
    a matrix as ``row,col,re,im`` rows, a flat dict as ``key,value`` rows
    and a list of flat dicts as a table; the manifest goes on a leading
    ``#`` comment line.
    """
    if fmt == "json":
        if manifest is None:
            return canonical_json(payload).encode("utf-8")
        body = canonical_json(payload)
        head = canonical_json(manifest.to_json())
        return ('{"manifest":' + head + ',"payload":' + body + "}").encode("utf-8")
    if fmt != "csv":
        raise EncodingError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    if manifest is not None:
        buf.write("# manifest " + canonical_json(manifest.to_json()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    rows = _matrix_rows(payload)
    if rows is not None:
        w.writerow(["row", "col", "re", "im"])
        w.writerows(rows)
    elif isinstance(payload, dict) and all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in payload.values()):
        plain = to_plain(payload)
        w.writerow(["key", "value"])
        for k in sorted(plain):
            w.writerow([k, _cell(plain[k])])
    elif isinstance(payload, (list, tuple)) and payload and all(isinstance(r, dict) for r in payload):
        plain = [to_plain(r) for r in payload]
        keys = sorted({k for r in plain for k in r})
        w.writerow(keys)
        for r in plain:
            w.writerow([_cell(r.get(k)) for k in keys])
    else:
        raise EncodingError("CSV needs a matrix, a flat mapping or a list of flat records")
    return buf.getvalue().encode("utf-8")


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "%.12e" % v
    return str(v)


def write_atomic(data: bytes, path: Optional[str]) -> None:
    """Write to ``path`` via a temporary file and rename, or to stdout."""
    if path is None or path == "-":
        import sys

        sys.stdout.buffer.write(data + (b"" if data.endswith(b"\n") else b"\n"))
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".opramsey-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
