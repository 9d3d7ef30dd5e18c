"""Float32 vector codec and normalization helpers.

Embeddings and cached features are serialized as base64 little-endian
32-bit floats so persisted logs and manifests round-trip bit-exactly.
"""
from __future__ import annotations

import base64

import numpy as np

from .errors import ZeroVector

UNIT_NORM_TOL = 1e-6


def encode_f32(vec: np.ndarray) -> str:
    """Serialize a vector as base64 of little-endian float32 bytes."""
    arr = np.asarray(vec, dtype="<f4")
    return base64.b64encode(arr.tobytes()).decode("ascii")


def decode_f32(data: str) -> np.ndarray:
    """Inverse of encode_f32. Raises ValueError on malformed input."""
    raw = base64.b64decode(data.encode("ascii"), validate=True)
    if len(raw) % 4 != 0:
        raise ValueError(f"feature byte length {len(raw)} not a multiple of 4")
    return np.frombuffer(raw, dtype="<f4").copy()


def l2_normalize(vec: np.ndarray) -> np.ndarray:
    """Return vec scaled to unit L2 norm, as float32."""
    arr = np.asarray(vec, dtype=np.float32)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ZeroVector("cannot normalize a zero vector")
    return (arr / norm).astype(np.float32)


def is_unit_norm(vec: np.ndarray, tol: float = UNIT_NORM_TOL) -> bool:
    return abs(float(np.linalg.norm(vec)) - 1.0) <= tol
