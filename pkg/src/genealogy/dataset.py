"""Feature matrix + target container shared by both prediction tasks.

Tables are tab-separated with a header row.  The first line is a comment
carrying the feature families as JSON, e.g.::

    #groups {"temporal": ["creation_time", "avg_time_gap"], ...}
    id<TAB>creation_time<TAB>...<TAB>label<TAB>rate_target

Missing values are written as ``nan``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np


@dataclass
class Dataset:
    ids: list[str]
    feature_names: list[str]
    X: np.ndarray
    y: np.ndarray
    groups: dict[str, list[str]] = field(default_factory=dict)
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(len(self.ids), len(self.feature_names))
        self.y = np.asarray(self.y, dtype=float)
        if len(self.y) != len(self.ids):
            raise ValueError("target length does not match row count")

    def __len__(self):
        return len(self.ids)

    def columns(self, names: Sequence[str]) -> np.ndarray:
        idx = [self.feature_names.index(n) for n in names]
        return self.X[:, idx]

    def resolve(self, selection: str | Sequence[str] | None) -> list[str]:
        """Feature names for a family name, a list of names, or everything."""
        if selection is None or selection == "all":
            return list(self.feature_names)
        if isinstance(selection, str):
            return list(self.groups[selection])
        return list(selection)

    def select(self, features: str | Sequence[str] | None) -> "Dataset":
        names = self.resolve(features)
        groups = {g: [n for n in ns if n in names] for g, ns in self.groups.items()}
        return Dataset(list(self.ids), names, self.columns(names), self.y.copy(),
                       {g: ns for g, ns in groups.items() if ns},
                       {k: v.copy() for k, v in self.extra.items()})

    def rows(self, mask) -> "Dataset":
        mask = np.asarray(mask)
        ids = [i for i, keep in zip(self.ids, mask) if keep] if mask.dtype == bool \
            else [self.ids[i] for i in mask]
        return Dataset(ids, list(self.feature_names), self.X[mask], self.y[mask],
                       dict(self.groups), {k: v[mask] for k, v in self.extra.items()})

    def with_target(self, column: str) -> "Dataset":
        out = Dataset(list(self.ids), list(self.feature_names), self.X.copy(),
                      self.extra[column].copy(), dict(self.groups),
                      {k: v.copy() for k, v in self.extra.items()})
        return out

    def to_tsv(self, fh: TextIO, target_name: str = "label") -> None:
        fh.write("#groups " + json.dumps(self.groups) + "\n")
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        extra_names = list(self.extra)
        w.writerow(["id", *self.feature_names, target_name, *extra_names])
        for r, rid in enumerate(self.ids):
            w.writerow([rid, *(_fmt(v) for v in self.X[r]), _fmt(self.y[r]),
                        *(_fmt(self.extra[e][r]) for e in extra_names)])

    @classmethod
    def from_tsv(cls, fh: TextIO, target_name: str = "label") -> "Dataset":
        first = fh.readline()
        if not first.startswith("#groups "):
            raise ValueError("dataset table must start with a #groups line")
        groups = json.loads(first[len("#groups "):])
        rd = csv.reader(fh, delimiter="\t")
        header = next(rd)
        if header[0] != "id" or target_name not in header:
            raise ValueError(f"bad dataset header {header[:3]}...")
        ti = header.index(target_name)
        names = header[1:ti]
        extra_names = header[ti + 1:]
        ids, X, y, extra = [], [], [], {e: [] for e in extra_names}
        for row in rd:
            if not row:
                continue
            ids.append(row[0])
            X.append([float(v) for v in row[1:ti]])
            y.append(float(row[ti]))
            for e, v in zip(extra_names, row[ti + 1:]):
                extra[e].append(float(v))
        return cls(ids, names, np.array(X, dtype=float).reshape(len(ids), len(names)),
                   np.array(y), groups, {e: np.array(v) for e, v in extra.items()})


def _fmt(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if v.is_integer() and abs(v) < 2 ** 53:
        return str(int(v))
    return repr(v)
