"""Experiment reports: summary statistics, confusion counts and JSON/CSV output."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["five_number_summary", "Confusion", "ExperimentReport", "to_jsonable"]


def five_number_summary(values) -> dict:
    """min / Q1 / median / mean / Q3 / max / sd of a sample."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty sample")
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    return {"min": float(v.min()), "q1": float(q1), "median": float(med),
            "mean": float(v.mean()), "q3": float(q3), "max": float(v.max()),
            "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0, "n": int(v.size)}


@dataclass
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def false_positive_rate(self) -> float:
        neg = self.fp + self.tn
        return self.fp / neg if neg else 0.0

    @property
    def sensitivity(self) -> float:
        pos = self.tp + self.fn
        return self.tp / pos if pos else 1.0

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
                "false_positive_rate": self.false_positive_rate,
                "sensitivity": self.sensitivity}


def to_jsonable(obj):
    """Recursively convert numpy containers and scalars for ``json.dumps``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


@dataclass
class ExperimentReport:
    """Results of one experiment.  ``timings`` is kept apart so reports can be compared."""

    name: str
    summaries: dict = field(default_factory=dict)      # label -> five_number_summary
    confusion: dict = field(default_factory=dict)      # label -> Confusion
    hurst: list = field(default_factory=list)
    activation: dict = field(default_factory=dict)     # label -> list of included vertices
    extra: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = True) -> dict:
        out = {"name": self.name, "summaries": self.summaries,
               "confusion": {k: v.to_dict() for k, v in self.confusion.items()},
               "hurst": self.hurst, "activation": self.activation, "extra": self.extra}
        if include_timings:
            out["timings"] = self.timings
        return to_jsonable(out)

    def write_json(self, path, include_timings: bool = True) -> None:
        Path(path).write_text(json.dumps(self.to_dict(include_timings), indent=2,
                                         sort_keys=True) + "\n")

    def write_summary_csv(self, path) -> None:
        keys = ["min", "q1", "median", "mean", "q3", "max", "sd", "n"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label"] + keys)
            for label, s in self.summaries.items():
                w.writerow([label] + [s[k] for k in keys])

    @classmethod
    def read_json(cls, path) -> "ExperimentReport":
        d = json.loads(Path(path).read_text())
        conf = {k: Confusion(v["tp"], v["fp"], v["tn"], v["fn"])
                for k, v in d.get("confusion", {}).items()}
        return cls(name=d["name"], summaries=d.get("summaries", {}), confusion=conf,
                   hurst=d.get("hurst", []), activation=d.get("activation", {}),
                   extra=d.get("extra", {}), timings=d.get("timings", {}))
