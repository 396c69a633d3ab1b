"""Result serialization: versioned JSON, tidy CSV, and run manifests.

Primary outputs (JSON and CSV) contain nothing time- or host-dependent,
so a rerun with the same inputs and seed reproduces them byte for byte.
The manifest carries the one timestamp.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def jsonable(obj):
    """Recursively convert dataclasses, numpy values, enums, and paths
    into plain JSON-serializable structures."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: jsonable(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
        }
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(document: dict, path) -> None:
    payload = {"schema_version": SCHEMA_VERSION}
    payload.update(jsonable(document))
    text = json.dumps(payload, indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")


def write_csv(rows, path, fieldnames=None) -> None:
    """Write dict rows; columns default to first-seen order across rows."""
    rows = [jsonable(r) for r in rows]
    if fieldnames is None:
        fieldnames = []
        for row in rows:
            for key in row:
                if key not in fieldnames:
                    fieldnames.append(key)
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def file_digest(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclasses.dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a command-line run."""

    command: str
    flags: dict
    input_digests: dict
    seed: int | None
    version: str
    timestamp: str

    @classmethod
    def create(cls, command: str, flags: dict, inputs: dict,
               seed: int | None, version: str) -> "RunManifest":
        digests = {name: file_digest(path) for name, path in inputs.items()}
        return cls(
            command=command,
            flags=jsonable(flags),
            input_digests=digests,
            seed=seed,
            version=version,
            timestamp=datetime.now(timezone.utc).isoformat(),
        )

    def write(self, path) -> None:
        write_json(dataclasses.asdict(self), path)
