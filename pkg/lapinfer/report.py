# lapinfer/report.py
"""
Provenance and output files.

Every output carries a ``run_digest``, the SHA-256 of the canonical JSON of
the analytical configuration. Timestamps, worker counts and output paths are
never part of it, so re-running the same analysis reproduces the same digest.
The full ``RunRecord`` goes to a ``<output>.run.json`` sidecar.
"""

import hashlib
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from lapinfer import __version__

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


def canonical_json(payload: Any) -> str:
    """Compact JSON with sorted keys and numpy values converted, the input to every digest."""
    return json.dumps(_jsonable(payload), sort_keys=True, separators=(",", ":"))


def digest(payload: Any) -> str:
    """SHA-256 hex digest of the canonical JSON of ``payload``."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def input_digest(groups: Iterable[Any]) -> str:
    """Digest over group labels and the raw bytes of every Laplacian, in order."""
    h = hashlib.sha256()
    for group in groups:
        h.update(group.label.encode("utf-8"))
        for L in group.laplacians:
            h.update(np.ascontiguousarray(L.entries, dtype="<f8").tobytes())
    return h.hexdigest()


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunRecord:
    """What was run, with which configuration, and where the results went."""

    command: List[str]
    config: Dict[str, Any]
    seed: Optional[int] = None
    version: str = __version__
    started: str = field(default_factory=_utc_now)
    finished: Optional[str] = None
    outputs: List[str] = field(default_factory=list)

    @classmethod
    def from_argv(cls, config: Dict[str, Any], seed: Optional[int] = None,
                  argv: Optional[Sequence[str]] = None) -> "RunRecord":
        return cls(command=list(sys.argv if argv is None else argv), config=config, seed=seed)

    @property
    def run_digest(self) -> str:
        return digest({"config": self.config, "seed": self.seed, "version": self.version})

    def finish(self, *outputs: PathLike) -> None:
        self.outputs.extend(str(p) for p in outputs)
        self.finished = _utc_now()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config": _jsonable(self.config),
            "run_digest": self.run_digest,
            "seed": self.seed,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "outputs": self.outputs,
        }


def _default_file_mode() -> int:
    # the umask can only be read by setting it
    umask = os.umask(0)
    os.umask(umask)
    return 0o666 & ~umask


def atomic_write(path: PathLike, text: str) -> Path:
    """
    Write ``text`` to a temporary file beside ``path`` and rename it into place.

    The file gets the mode a plain ``open`` would give it under the current
    umask, not the private mode of the temporary file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.chmod(tmp, _default_file_mode())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info("wrote %s", path)
    return path


def write_json_report(path: PathLike, payload: Dict[str, Any], record: RunRecord) -> Path:
    """Write a JSON report stamped with the run digest, then its RunRecord sidecar."""
    body = dict(_jsonable(payload))
    body["run_digest"] = record.run_digest
    body["version"] = record.version
    out = atomic_write(path, json.dumps(body, indent=2, sort_keys=True) + "\n")
    write_run_record(out, record)
    return out


def write_run_record(output: PathLike, record: RunRecord) -> Path:
    """
    Finish the record with output and write it next to it as ``<output>.run.json``.

    Args:
        output: The file the record describes.
        record: Run record to finish.

    Returns:
        Path of the sidecar.
    """
    record.finish(output)
    sidecar = Path(f"{output}.run.json")
    return atomic_write(sidecar, json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n")


def digest_header(run_digest: str) -> str:
    """Leading comment line carrying the run digest in CSV and matrix files."""
    return f"# run_digest={run_digest}\n"
