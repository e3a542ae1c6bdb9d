"""Time-indexed sequences of probability vectors and their CSV form.

Simulators and ODE integrators both return a :class:`Trajectory`, and both
write the same CSV layout::

    t,<state columns...>,saturated_frac,mean_y,empty_places
    ...
    # version=...
    # config={...}
    # status=...

Numbers are written with 17 significant digits so that text-level diffs are
exact.  ``empty_places`` is the mean number of free places per node.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import ProbVec, RistStateSpace, _tag_size

__all__ = ["Trajectory", "summaries", "state_columns", "read_trajectory_csv"]


def state_columns(space) -> list:
    if isinstance(space, RistStateSpace):
        return space.column_names()
    return [f"p_{k}" for k in range(_tag_size(space))]


def summaries(p: ProbVec) -> tuple:
    """``(saturated_frac, mean_y, empty_places)`` of a node distribution."""
    v = p.values
    space = p.space
    if isinstance(space, RistStateSpace):
        sat = float(v[space.saturated].sum())
        mean_y = float(v @ space.y)
        empty = float(v @ (space.C - space.x - space.y))
        return sat, mean_y, empty
    kind, _, n = space.partition(":")
    k = np.arange(int(n) + 1)
    if kind == "dar":
        return float(v[-1]), 0.0, float(v @ (int(n) - k))
    # truncated queue of empty places: state 0 means saturated
    return float(v[0]), 0.0, float(v @ k)


@dataclass
class Trajectory:
    """Grid samples of a node distribution plus run metadata."""

    times: np.ndarray
    states: list
    counters: dict = field(default_factory=dict)
    status: str = "ReachedHorizon"
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)

    @property
    def space(self):
        return self.states[0].space

    def matrix(self) -> np.ndarray:
        return np.vstack([s.values for s in self.states])

    def summary_matrix(self) -> np.ndarray:
        return np.array([summaries(s) for s in self.states])

    def at(self, t: float) -> ProbVec:
        i = int(np.argmin(np.abs(self.times - t)))
        return self.states[i]

    def to_csv(self, path, version: Optional[str] = None, config: Optional[dict] = None) -> Path:
        from . import __version__

        path = Path(path)
        cols = ["t"] + state_columns(self.space) + ["saturated_frac", "mean_y", "empty_places"]
        lines = [",".join(cols)]
        for t, s in zip(self.times, self.states):
            row = [t, *s.values, *summaries(s)]
            lines.append(",".join(f"{float(x):.17g}" for x in row))
        lines.append(f"# version={version or __version__}")
        meta = dict(self.metadata)
        if config is not None:
            meta["config"] = config
        if self.counters:
            meta["counters"] = self.counters
        lines.append("# config=" + json.dumps(meta, sort_keys=True, default=str))
        lines.append(f"# status={self.status}")
        path.write_text("\n".join(lines) + "\n")
        return path


def read_trajectory_csv(path) -> tuple:
    """Read back ``(header, data, trailer)`` from a trajectory CSV."""
    header, rows, trailer = None, [], {}
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition("=")
            trailer[key] = val
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append([float(x) for x in line.split(",")])
    return header, np.array(rows), trailer
