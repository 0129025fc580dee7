"""Run manifests and CSV output.

CSV cells are written with repr() for floats so identical runs produce
byte-identical files; manifests are JSON and carry the full configuration,
the master seed, the package and defaults versions, and wall time.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

from . import __version__
from .experiments import DEFAULTS_VERSION


def format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(c) for c in row) + "\n")


def write_manifest(path: Path, config: dict, seed: int, wall_time_s: float,
                   extra: dict | None = None) -> None:
    doc = {
        "package_version": __version__,
        "defaults_version": DEFAULTS_VERSION,
        "master_seed": seed,
        "wall_time_s": wall_time_s,
        "config": config,
    }
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


class RunWriter:
    """Collects one run's outputs under a single directory."""

    def __init__(self, outdir: Path, config: dict, seed: int,
                 extra: dict | None = None):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.seed = seed
        self.extra = extra
        self._t0 = time.monotonic()

    def csv(self, name: str, header: list[str], rows) -> Path:
        path = self.outdir / name
        write_csv(path, header, rows)
        return path

    def text(self, name: str, content: str) -> Path:
        path = self.outdir / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
        return path

    def finish(self) -> Path:
        path = self.outdir / "manifest.json"
        write_manifest(path, self.config, self.seed,
                       time.monotonic() - self._t0, extra=self.extra)
        return path
