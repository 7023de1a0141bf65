"""Standalone OSAV v1 writer.

The format is the external contract of the downstream calibration toolkit
(little-endian, no padding): magic "OSAV", u8 version = 1, u8 reserved = 0,
u32 N, u32 K, N*K float32 activations row-major, N int32 labels with -1
marking unknown rows. Deliberately reimplemented here so this package
depends on the byte format only, not on the consumer's code.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"OSAV"
VERSION = 1
_HEADER = struct.Struct("<4sBBII")


def write_osav(activations: np.ndarray, labels: np.ndarray, path: str | Path) -> None:
    """Atomically write an OSAV v1 file (temp file + rename).

    ``activations`` must be a finite N x K float matrix and ``labels`` a
    length-N integer vector in [-1, K-1].
    """
    acts = np.ascontiguousarray(activations, dtype="<f4")
    labs = np.ascontiguousarray(labels, dtype="<i4")
    if acts.ndim != 2 or labs.ndim != 1 or acts.shape[0] != labs.shape[0]:
        raise ValueError("activations must be N x K with N matching labels")
    n, k = acts.shape
    if k < 2:
        raise ValueError("need at least two activation columns")
    if not np.all(np.isfinite(acts)):
        raise ValueError("refusing to write non-finite activations")
    if n and (labs.max() >= k or labs.min() < -1):
        raise ValueError("labels must lie in [-1, K-1]")

    payload = _HEADER.pack(MAGIC, VERSION, 0, n, k) + acts.tobytes() + labs.tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".osav.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
