"""Binary IQ sample file I/O.

Format: little-endian interleaved 32-bit floats (I, Q, I, Q, ...) plus a
JSON sidecar ``<file>.json`` carrying the sample rate and free-form
metadata. This matches the common SDR interchange convention.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dsp import DataError
from .txframe import IqStream


def sidecar_path(iq_path: str | Path) -> Path:
    return Path(str(iq_path) + ".json")


def write_iq(path: str | Path, stream: IqStream, metadata: dict | None = None) -> None:
    """Write samples as interleaved float32 LE with a JSON sidecar."""
    path = Path(path)
    s = np.asarray(stream.samples, dtype=np.complex128)
    if not np.all(np.isfinite(s)):
        raise DataError("refusing to write non-finite samples")
    inter = np.empty(2 * s.size, dtype="<f4")
    inter[0::2] = s.real.astype(np.float32)
    inter[1::2] = s.imag.astype(np.float32)
    path.write_bytes(inter.tobytes())
    side = {
        "format": "cf32_le",
        "sample_rate_hz": float(stream.nominal_rate),
        "num_samples": int(s.size),
    }
    if stream.origin_index is not None:
        side["origin_index"] = int(stream.origin_index)
    if metadata:
        side["metadata"] = metadata
    sidecar_path(path).write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


def read_iq(path: str | Path) -> IqStream:
    """Read an interleaved float32 LE IQ file and its JSON sidecar."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"IQ file not found: {path}")
    raw = path.read_bytes()
    if len(raw) % 8 != 0:
        raise DataError(f"truncated IQ file (size {len(raw)} is not a whole "
                        "number of complex float32 samples)")
    side_file = sidecar_path(path)
    if not side_file.is_file():
        raise DataError(f"missing sidecar file: {side_file}")
    try:
        side = json.loads(side_file.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed sidecar JSON: {exc}") from exc
    if side.get("format") != "cf32_le":
        raise DataError(f"unsupported IQ format: {side.get('format')!r}")
    rate = side.get("sample_rate_hz")
    if not isinstance(rate, (int, float)) or rate <= 0:
        raise DataError("sidecar must declare a positive sample_rate_hz")
    inter = np.frombuffer(raw, dtype="<f4")
    declared = side.get("num_samples")
    if declared is not None and declared != inter.size // 2:
        raise DataError(f"sidecar declares {declared} samples, file holds {inter.size // 2}")
    samples = inter[0::2].astype(np.float64) + 1j * inter[1::2].astype(np.float64)
    if not np.all(np.isfinite(samples)):
        raise DataError("IQ file contains non-finite samples")
    origin = side.get("origin_index")
    return IqStream(samples=samples, nominal_rate=float(rate),
                    origin_index=int(origin) if origin is not None else None)
