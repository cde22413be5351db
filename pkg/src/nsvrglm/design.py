"""Stimulus courses, the canonical double-gamma HRF and task design matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

__all__ = [
    "StimulusCourse",
    "DesignMatrix",
    "canonical_hrf",
    "convolve_design",
    "build_design",
    "standardize_columns",
    "block_schedule",
    "read_stimulus_file",
]

# double-gamma shape: modes at the response / undershoot delays
RESPONSE_DELAY = 5.0
UNDERSHOOT_DELAY = 12.0
DISPERSION = 1.0
UNDERSHOOT_RATIO = 1.0 / 6.0
HRF_SUPPORT = 32.0
OVERSAMPLING = 16


def _raw_hrf(t):
    t = np.asarray(t, dtype=float)
    a1 = RESPONSE_DELAY / DISPERSION + 1.0
    a2 = UNDERSHOOT_DELAY / DISPERSION + 1.0
    return (stats.gamma.pdf(t, a1, scale=DISPERSION)
            - UNDERSHOOT_RATIO * stats.gamma.pdf(t, a2, scale=DISPERSION))


def _hrf_peak() -> float:
    grid = np.linspace(0.0, HRF_SUPPORT, 32001)
    return float(_raw_hrf(grid).max())


_PEAK = _hrf_peak()


def canonical_hrf(t):
    """Double-gamma haemodynamic response scaled to a peak value of 1.

    Zero for ``t <= 0``.  Accepts scalars or arrays (seconds).
    """
    t = np.asarray(t, dtype=float)
    out = np.where(t > 0, _raw_hrf(np.clip(t, 0.0, None)) / _PEAK, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class StimulusCourse:
    """On intervals ``(onset, duration)`` in seconds sampled every ``tr`` seconds for ``length`` scans."""

    intervals: list
    tr: float
    length: int

    def __post_init__(self):
        if self.tr <= 0:
            raise ValueError("tr must be positive")
        if self.length < 1:
            raise ValueError("length must be positive")
        self.intervals = [(float(on), float(dur)) for on, dur in self.intervals]
        if any(dur < 0 for _, dur in self.intervals):
            raise ValueError("negative duration")

    def indicator(self, oversampling: int = 1) -> np.ndarray:
        """0/1 course sampled at ``tr / oversampling``."""
        dt = self.tr / oversampling
        t = np.arange(self.length * oversampling) * dt
        s = np.zeros_like(t)
        for on, dur in self.intervals:
            s[(t >= on - 1e-9) & (t < on + dur - 1e-9)] = 1.0
        return s


@dataclass
class DesignMatrix:
    """Task regressors (T x K) plus optional nuisance columns (T x N)."""

    tasks: np.ndarray
    nuisance: np.ndarray | None = None
    task_names: list = field(default_factory=list)

    def __post_init__(self):
        self.tasks = np.atleast_2d(np.asarray(self.tasks, dtype=float))
        if self.nuisance is not None:
            self.nuisance = np.asarray(self.nuisance, dtype=float).reshape(len(self.tasks), -1)
        if not np.all(np.isfinite(self.tasks)):
            raise ValueError("design contains non-finite values")
        if not self.task_names:
            self.task_names = [f"task{k + 1}" for k in range(self.n_tasks)]

    @property
    def n_tasks(self) -> int:
        return self.tasks.shape[1]

    @property
    def n_scans(self) -> int:
        return self.tasks.shape[0]

    @property
    def n_nuisance(self) -> int:
        return 0 if self.nuisance is None else self.nuisance.shape[1]

    def full(self) -> np.ndarray:
        """Task columns followed by nuisance columns."""
        if self.nuisance is None:
            return self.tasks
        return np.column_stack([self.tasks, self.nuisance])

    def with_intercept(self) -> "DesignMatrix":
        ones = np.ones((self.n_scans, 1))
        nuis = ones if self.nuisance is None else np.column_stack([ones, self.nuisance])
        return DesignMatrix(self.tasks.copy(), nuis, list(self.task_names))


def convolve_design(stim: StimulusCourse, hrf=canonical_hrf,
                    oversampling: int = OVERSAMPLING) -> np.ndarray:
    """Riemann-sum convolution of a stimulus course with ``hrf`` on the TR grid.

    The stimulus and HRF are evaluated ``oversampling`` times per TR, the
    HRF truncated at 32 s, and the result decimated back to the scan times.
    """
    dt = stim.tr / oversampling
    s = stim.indicator(oversampling)
    u = np.arange(int(np.ceil(HRF_SUPPORT / dt)) + 1) * dt
    h = np.asarray(hrf(u), dtype=float)
    x = np.convolve(s, h)[: s.size] * dt
    return x[::oversampling].copy()


def build_design(stimuli, hrf=canonical_hrf, names=None) -> DesignMatrix:
    cols = [convolve_design(s, hrf) for s in stimuli]
    return DesignMatrix(np.column_stack(cols), task_names=list(names or []))


def standardize_columns(design: DesignMatrix) -> DesignMatrix:
    """Centre task columns and scale them to unit sample standard deviation."""
    x = design.tasks
    if x.shape[0] < 2:
        raise ValueError("need at least two scans to standardise")
    sd = x.std(axis=0, ddof=1)
    if np.any(sd <= 1e-12 * np.maximum(1.0, np.abs(x).max(axis=0))):
        raise ValueError("constant task column cannot be standardised")
    z = (x - x.mean(axis=0)) / sd
    nuis = None if design.nuisance is None else design.nuisance.copy()
    return DesignMatrix(z, nuis, list(design.task_names))


def block_schedule(n_tasks: int, length: int, tr: float = 1.0, on: float = 20.0,
                   rest: float = 10.0, start: float = 0.0) -> list:
    """Alternating single-block schedule: rest, task 1, rest, task 2, ... repeated.

    Each task is on for ``on`` seconds once per cycle of
    ``n_tasks * (on + rest)`` seconds, so tasks never overlap and every
    task has ``rest`` seconds of baseline on both sides of its blocks.
    """
    cycle = n_tasks * (on + rest)
    total = length * tr
    courses = []
    for k in range(n_tasks):
        first = start + rest + k * (on + rest)
        onsets = np.arange(first, total, cycle)
        courses.append(StimulusCourse([(o, on) for o in onsets], tr, length))
    return courses


def read_stimulus_file(path, tr: float, length: int) -> list:
    """Parse ``onset_s duration_s task_id`` rows.

    Returns the stimulus courses, one per task id, and the sorted task ids.
    """
    by_task: dict = {}
    for ln in Path(path).read_text().splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"{path}: malformed stimulus row {ln!r}")
        by_task.setdefault(parts[2], []).append((float(parts[0]), float(parts[1])))
    keys = sorted(by_task, key=lambda k: (not k.isdigit(), int(k) if k.isdigit() else 0, k))
    return [StimulusCourse(by_task[k], tr, length) for k in keys], keys
