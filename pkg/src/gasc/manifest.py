"""Run manifests and atomic output directories."""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from ._backend import BACKEND
from .errors import InputError

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "gasc.manifest"
MANIFEST_VERSION = 1


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    args: dict                       # parsed CLI arguments (replayable)
    config: dict                     # fully resolved configuration
    inputs: dict                     # path -> sha256
    seed: int | None
    tool_version: str = __version__
    backend: str = BACKEND
    started_at: str = field(default_factory=now)
    finished_at: str | None = None
    outputs: dict = field(default_factory=dict)   # relative path -> sha256

    def to_dict(self) -> dict:
        return {"format": MANIFEST_FORMAT, "version": MANIFEST_VERSION, **asdict(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        if d.get("format") != MANIFEST_FORMAT or d.get("version") != MANIFEST_VERSION:
            raise InputError("not a gasc run manifest (format/version mismatch)")
        fields = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        try:
            return cls(**fields)
        except TypeError as exc:
            raise InputError(f"malformed manifest: {exc}") from None

    @classmethod
    def load(cls, path) -> "RunManifest":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read manifest {path}: {exc}") from None


@contextmanager
def atomic_output_dir(target, overwrite: bool = False):
    """Yield a scratch directory that replaces ``target`` only on success."""
    target = Path(target).resolve()
    if target.exists() and (not target.is_dir() or any(target.iterdir())) and not overwrite:
        raise InputError(f"output directory {target} exists and is not empty (use --overwrite)")
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{target.name}.tmp-", dir=target.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    old = None
    if target.exists():
        old = target.parent / f".{target.name}.old-{os.getpid()}"
        os.rename(target, old)
    os.rename(tmp, target)
    if old is not None:
        shutil.rmtree(old, ignore_errors=True)


def finish(manifest: RunManifest, out: Path) -> None:
    """Hash every output file and write the manifest last."""
    manifest.outputs = {str(p.relative_to(out)): sha256_file(p)
                        for p in sorted(out.rglob("*")) if p.is_file()}
    manifest.finished_at = now()
    (out / MANIFEST_NAME).write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
