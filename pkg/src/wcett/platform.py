"""Synthetic timing platform and measurement sets.

The platform hides per-edge baseline costs and adds a bounded per-path
variation ``d`` to every measurement.  Draws are keyed on ``(seed, path)`` so
measuring is order-independent and reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .dag import PathVec, ProgramDag

UNIFORM = "uniform"
ADVERSARIAL = "adversarial"


def path_key(path: PathVec) -> int:
    digest = hashlib.blake2b(np.asarray(path.edge_ids, dtype="<i8").tobytes(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class PlatformModel:
    weights: tuple[float, ...]
    mu_max: float = 0.0
    law: str = UNIFORM
    seed: int = 0
    adversarial: Mapping[tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.mu_max < 0:
            raise ValueError("mu_max must be nonnegative")
        if self.law not in (UNIFORM, ADVERSARIAL):
            raise ValueError(f"unknown perturbation law {self.law!r}")
        if any(w < 0 for w in self.weights):
            raise ValueError("true edge weights must be nonnegative")
        over = [p for p, d in self.adversarial.items() if abs(d) > self.mu_max]
        if over:
            raise ValueError(f"adversarial offsets exceed mu_max on paths {over}")

    @property
    def true_weights(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def baseline(self, path: PathVec) -> float:
        return path.length(self.true_weights)

    def offset(self, path: PathVec) -> float:
        """The variation ``d`` this platform adds to ``path``."""
        if self.law == ADVERSARIAL:
            return float(self.adversarial.get(tuple(path.edge_ids), 0.0))
        if self.mu_max == 0:
            return 0.0
        rng = np.random.default_rng([self.seed, path_key(path)])
        return float(rng.uniform(-self.mu_max, self.mu_max))

    def to_json(self) -> str:
        doc = {
            "weights": list(self.weights),
            "mu_max": self.mu_max,
            "law": self.law,
            "seed": self.seed,
        }
        if self.law == ADVERSARIAL:
            doc["adversarial"] = [{"path": list(p), "d": d} for p, d in sorted(self.adversarial.items())]
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PlatformModel":
        doc = json.loads(text)
        adv = {tuple(int(i) for i in a["path"]): float(a["d"]) for a in doc.get("adversarial", [])}
        return cls(
            tuple(float(w) for w in doc["weights"]),
            float(doc.get("mu_max", 0.0)),
            doc.get("law", UNIFORM),
            int(doc.get("seed", 0)),
            adv,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PlatformModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def measure(platform: PlatformModel, path: PathVec) -> float:
    if path.n_edges != len(platform.weights):
        raise ValueError(f"path over {path.n_edges} edges, platform has {len(platform.weights)}")
    return platform.baseline(path) + platform.offset(path)


class MeasurementSet:
    """Observed path lengths.

    With ``unique=True`` (the default) a path holds one length and
    re-measuring overwrites it; ``unique=False`` keeps every record.
    """

    def __init__(self, records: Iterable[tuple[PathVec, float]] = (), unique: bool = True):
        self.unique = unique
        self._records: list[tuple[PathVec, float]] = []
        self._pos: dict[tuple[int, ...], int] = {}
        for p, l in records:
            self.add(p, l)

    def add(self, path: PathVec, length: float) -> None:
        key = path.edge_ids
        if self.unique and key in self._pos:
            self._records[self._pos[key]] = (path, float(length))
            return
        self._pos.setdefault(key, len(self._records))
        self._records.append((path, float(length)))

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[tuple[PathVec, float]]:
        return iter(self._records)

    def __contains__(self, path: PathVec) -> bool:
        return path.edge_ids in self._pos

    def __eq__(self, other) -> bool:
        return isinstance(other, MeasurementSet) and self._records == other._records

    @property
    def paths(self) -> list[PathVec]:
        return [p for p, _ in self._records]

    @property
    def lengths(self) -> np.ndarray:
        return np.array([l for _, l in self._records], dtype=float)

    def length_of(self, path: PathVec) -> float:
        return self._records[self._pos[path.edge_ids]][1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("path;length\n")
        for p, l in self._records:
            buf.write(f"{','.join(map(str, p.edge_ids))};{_decimal(l)}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, dag: ProgramDag, unique: bool = True) -> "MeasurementSet":
        rows = csv.reader(io.StringIO(text), delimiter=";")
        header = next(rows, None)
        if header != ["path", "length"]:
            raise ValueError(f"bad measurement header {header}")
        out = cls(unique=unique)
        for row in rows:
            if not row:
                continue
            out.add(dag.path(int(i) for i in row[0].split(",")), float(row[1]))
        return out

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, dag: ProgramDag) -> "MeasurementSet":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"), dag)


def _decimal(x: float) -> str:
    text = f"{x:.6f}".rstrip("0").rstrip(".")
    return "0" if text in ("", "-0") else text


def measure_all(platform: PlatformModel, paths: Sequence[PathVec]) -> MeasurementSet:
    return MeasurementSet((p, measure(platform, p)) for p in paths)


def perturb(measurements: MeasurementSet, percent: float, seed: int) -> MeasurementSet:
    """Scale every length by an independent factor drawn from ``1 ± percent/100``."""
    if percent < 0:
        raise ValueError("percent must be nonnegative")
    rng = np.random.default_rng(seed)
    out = MeasurementSet(unique=measurements.unique)
    for p, l in measurements:
        u = rng.uniform(-percent / 100.0, percent / 100.0)
        out.add(p, l if percent == 0 else l * (1.0 + u))
    return out
