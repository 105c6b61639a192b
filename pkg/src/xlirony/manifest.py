"""Run manifests: what was run, on which inputs, with which seed."""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__
from .errors import IronyError


@dataclass
class RunManifest:
    command: str
    config: dict
    input_digests: dict
    seed: int
    tool_version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def write(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(asdict(self), sort_keys=True, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path) -> "RunManifest":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls(**raw)
        except (OSError, ValueError, TypeError) as exc:
            raise IronyError(f"{path}: unreadable manifest ({exc})") from exc

    def stale_inputs(self) -> list:
        """Inputs whose current digest differs from the recorded one."""
        return [p for p, d in self.input_digests.items() if not Path(p).exists() or sha256(p) != d]


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def digests(paths: Sequence) -> dict:
    return {str(Path(p).resolve()): sha256(p) for p in paths if p is not None and Path(p).is_file()}
