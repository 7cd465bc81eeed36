"""
Result files: CSV tables, verdict blocks and run metadata.

Floats are written with ``repr`` (shortest round-trip form), so a file is a
pure function of the numbers it holds.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], description: str = "") -> Path:
    """Write a comma-separated table with a leading ``#`` comment line documenting the columns."""
    path = Path(path)
    comment = "# " + (description + "; " if description else "") + "columns: " + ", ".join(columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(comment + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Read back a table written by :func:`write_csv` (numeric columns only)."""
    lines = [l for l in Path(path).read_text(encoding="utf-8").splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    data = np.array([[float(v) for v in l.split(",")] for l in lines[1:]]) if len(lines) > 1 else np.empty((0, len(header)))
    return header, data


@dataclass
class Verdict:
    """PASS/FAIL lines with the measured values behind each assertion."""

    title: str
    items: list = field(default_factory=list)

    def check(self, name: str, passed: bool, measured: str) -> bool:
        self.items.append((name, bool(passed), measured))
        return bool(passed)

    @property
    def passed(self) -> bool:
        return all(p for _, p, _ in self.items)

    def failures(self) -> list[dict]:
        return [{"assertion": n, "measured": m} for n, p, m in self.items if not p]

    def text(self) -> str:
        lines = [f"== {self.title} =="]
        lines += [f"{'PASS' if p else 'FAIL'} {n}: {m}" for n, p, m in self.items]
        lines.append(f"OVERALL {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def write(self, outdir) -> None:
        outdir = Path(outdir)
        (outdir / "verdict.txt").write_text(self.text(), encoding="utf-8")
        (outdir / "failures.json").write_text(json.dumps(self.failures(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def code_hash() -> str:
    """Digest of the package sources and version."""
    h = hashlib.blake2b(digest_size=12)
    h.update(__version__.encode())
    root = Path(__file__).resolve().parent
    for p in sorted(root.rglob("*.py")):
        h.update(str(p.relative_to(root)).encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def write_metadata(outdir, resolved_config: str, lineage: dict) -> None:
    """Echo the resolved configuration, the seed lineage and the code version."""
    outdir = Path(outdir)
    (outdir / "config.resolved").write_text(resolved_config, encoding="utf-8")
    (outdir / "lineage.json").write_text(json.dumps(lineage, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    (outdir / "version.txt").write_text(f"degspde {__version__}\ncode {code_hash()}\n", encoding="utf-8")
