"""Versioned binary checkpoints: named float64 arrays plus a JSON meta block.

Format: a zip archive written by ``numpy.savez`` with one ``.npy`` member
per parameter array and a ``__meta__`` member holding a JSON string with
``schema_version``, the object kind, and its constructor config.  Arrays
round-trip bitwise.
"""

from __future__ import annotations

import json

import numpy as np

SCHEMA_VERSION = 1


class CheckpointError(ValueError):
    """Raised for unreadable or mismatched checkpoint files."""


def save_checkpoint(path, kind: str, config: dict, arrays: dict, extra: dict | None = None):
    meta = {"schema_version": SCHEMA_VERSION, "kind": kind, "config": config}
    if extra:
        meta["extra"] = extra
    payload = {name: np.asarray(arr, dtype=np.float64) for name, arr in arrays.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
                 **payload)


def load_checkpoint(path) -> tuple[str, dict, dict, dict]:
    """Returns (kind, config, arrays, extra)."""
    try:
        with np.load(path) as bundle:
            if "__meta__" not in bundle:
                raise CheckpointError(f"{path}: not a checkpoint (missing meta block)")
            meta = json.loads(bundle["__meta__"].tobytes().decode())
            arrays = {k: bundle[k] for k in bundle.files if k != "__meta__"}
    except (OSError, ValueError) as err:
        raise CheckpointError(f"{path}: cannot read checkpoint ({err})") from None
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise CheckpointError(
            f"{path}: unsupported schema_version {meta.get('schema_version')!r}")
    return meta["kind"], meta["config"], arrays, meta.get("extra", {})
