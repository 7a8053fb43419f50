"""Trace recording, cost model, and CSV/JSON serialization for algorithm runs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError

BASE_COLUMNS = (
    "iter", "sim_time", "n_grads_per_node", "n_comms",
    "subopt_node0", "mean_sq_dist_to_star", "consensus_gap",
)
MAX_ROWS = 100_000


@dataclass(frozen=True)
class CostModel:
    """Simulated-time accounting: one unit per gradient round, tau per gossip
    multiplication (a degree-K polynomial communication costs tau*K)."""

    tau: float = 0.0

    def __post_init__(self):
        if self.tau < 0:
            raise ValidationError("tau must be >= 0")


@dataclass
class Trace:
    """Time series of algorithm progress plus run metadata."""

    columns: tuple = BASE_COLUMNS
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def append(self, **kw):
        if len(self.rows) >= MAX_ROWS:
            return
        row = tuple(kw[c] for c in self.columns)
        self.rows.append(row)

    def column(self, name):
        idx = self.columns.index(name)
        return np.array([r[idx] for r in self.rows], dtype=float)

    # ---- serialization -------------------------------------------------------

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
        if not lines:
            raise ValidationError(f"{path}: empty trace file")
        columns = tuple(lines[0].split(","))
        rows = []
        for ln in lines[1:]:
            parts = ln.split(",")
            if len(parts) != len(columns):
                raise ValidationError(f"{path}: row width {len(parts)} != header width {len(columns)}")
            rows.append(tuple(_parse(p) for p in parts))
        return cls(columns=columns, rows=rows)

    def metadata_json(self):
        return json.dumps(self.metadata, indent=2, sort_keys=True, default=_json_default)


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _parse(tok):
    try:
        return float(tok)
    except ValueError:
        return tok


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


@dataclass
class Budget:
    """Stop conditions for a run; at least one must be set."""

    max_iterations: int = None
    max_sim_time: float = None
    target_suboptimality: float = None

    def __post_init__(self):
        if self.max_iterations is None and self.max_sim_time is None \
                and self.target_suboptimality is None:
            raise ValidationError("budget must set at least one stop condition")

    def exhausted(self, iteration, sim_time, subopt):
        if self.max_iterations is not None and iteration >= self.max_iterations:
            return True
        if self.max_sim_time is not None and sim_time >= self.max_sim_time:
            return True
        if (self.target_suboptimality is not None and subopt is not None
                and subopt <= self.target_suboptimality):
            return True
        return False
