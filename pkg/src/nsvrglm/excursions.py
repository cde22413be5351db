"""Joint-probability activation sets from posterior samples of an activation field."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

__all__ = [
    "ExcursionResult",
    "sample_posterior_field",
    "excursion_set",
    "activation_labels",
    "write_activation_map",
    "read_activation_map",
]

MIN_SAMPLES = 1000
MAX_STANDARD_ERROR = 0.01


@dataclass
class ExcursionResult:
    included: np.ndarray              # sorted vertex indices in D
    joint_probability: float          # Monte-Carlo P(all of D on the chosen side)
    standard_error: float
    alpha: float
    n_samples: int
    order: np.ndarray                 # vertices ranked by marginal probability
    marginal_probability: np.ndarray  # (V,)
    sign: str = "positive"
    warning: str | None = None

    @property
    def n_vertices(self) -> int:
        return self.marginal_probability.size

    def mask(self) -> np.ndarray:
        m = np.zeros(self.n_vertices, dtype=bool)
        m[self.included] = True
        return m

    def to_dict(self) -> dict:
        return {
            "sign": self.sign,
            "alpha": self.alpha,
            "n_samples": self.n_samples,
            "joint_probability": self.joint_probability,
            "standard_error": self.standard_error,
            "warning": self.warning,
            "included": self.included.tolist(),
        }


def sample_posterior_field(conditionals, weights, n_samples: int, seed, task: int | None = None,
                           block: int = 1000) -> np.ndarray:
    """Draws from the grid mixture of Gaussian conditionals.

    The number of draws per grid point is multinomial in the grid weights.
    With ``task`` set only that activation field is kept, giving shape
    (n_samples, V); otherwise the whole latent vector is returned.
    """
    if isinstance(conditionals, (list, tuple)):
        conds = list(conditionals)
    else:
        conds = [conditionals]
    w = np.ones(len(conds)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (len(conds),) or np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative, one per conditional")
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n_samples, w / w.sum())
    V = conds[0].n_vertices
    cols = slice(None) if task is None else slice(task * V, (task + 1) * V)
    width = conds[0].mean.size if task is None else V
    out = np.empty((n_samples, width))
    row = 0
    for cp, m in zip(conds, counts):
        for start in range(0, m, block):
            b = min(block, m - start)
            out[row:row + b] = cp.sample(b, rng, block=block)[:, cols]
            row += b
    return out


def _components(included, adjacency):
    sub = adjacency[included][:, included]
    _, labels = csgraph.connected_components(sub, directed=False)
    return labels


def excursion_set(samples, alpha: float = 0.05, sign: str = "positive", adjacency=None,
                  min_component_size: int = 1) -> ExcursionResult:
    """Largest set D, grown in order of marginal probability, with joint probability above ``1 - alpha``.

    ``samples`` has shape (n_samples, V).  Growth stops before the joint
    Monte-Carlo probability drops to ``1 - alpha`` or below.  With an
    ``adjacency`` matrix, connected components of D smaller than
    ``min_component_size`` are removed.
    """
    s = np.asarray(samples, dtype=float)
    if s.ndim != 2:
        raise ValueError("samples must be (n_samples, n_vertices)")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if sign not in ("positive", "negative"):
        raise ValueError("sign must be 'positive' or 'negative'")
    n, V = s.shape
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")
    hit = s > 0 if sign == "positive" else s < 0
    marginal = hit.mean(axis=0)
    order = np.argsort(-marginal, kind="stable")

    alive = np.ones(n, dtype=bool)
    chosen = []
    for v in order:
        nxt = alive & hit[:, v]
        if nxt.mean() <= 1.0 - alpha:
            break
        alive = nxt
        chosen.append(v)
    included = np.array(sorted(chosen), dtype=np.int64)

    if adjacency is not None and included.size and min_component_size > 1:
        adj = sparse.csr_matrix(adjacency)
        if adj.shape != (V, V):
            raise ValueError("adjacency does not match the number of vertices")
        labels = _components(included, adj)
        sizes = np.bincount(labels)
        included = included[sizes[labels] >= min_component_size]

    prob = float(np.all(hit[:, included], axis=1).mean()) if included.size else 1.0
    se = math.sqrt(max(prob * (1.0 - prob), 0.0) / n)
    warning = None
    if se > MAX_STANDARD_ERROR:
        warning = f"Monte-Carlo standard error {se:.3g} exceeds {MAX_STANDARD_ERROR}"
    return ExcursionResult(included=included, joint_probability=prob, standard_error=se,
                           alpha=float(alpha), n_samples=n, order=order,
                           marginal_probability=marginal, sign=sign, warning=warning)


def activation_labels(n_vertices: int, positive: ExcursionResult | None = None,
                      negative: ExcursionResult | None = None) -> np.ndarray:
    """Ternary map: +1 positive set, -1 negative set, 0 elsewhere."""
    lab = np.zeros(n_vertices, dtype=np.int64)
    if negative is not None:
        lab[negative.included] = -1
    if positive is not None:
        if negative is not None and np.intersect1d(positive.included, negative.included).size:
            raise ValueError("positive and negative sets overlap")
        lab[positive.included] = 1
    return lab


def write_activation_map(path, n_vertices: int, positive: ExcursionResult | None = None,
                         negative: ExcursionResult | None = None, task: str = "") -> None:
    """Write ``vertex,label`` rows after a ``#`` line of JSON metadata."""
    lab = activation_labels(n_vertices, positive, negative)
    meta = {"task": task,
            "positive": None if positive is None else
            {k: v for k, v in positive.to_dict().items() if k != "included"},
            "negative": None if negative is None else
            {k: v for k, v in negative.to_dict().items() if k != "included"}}
    lines = ["# " + json.dumps(meta), "vertex,label"]
    lines += [f"{v},{int(x)}" for v, x in enumerate(lab)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_activation_map(path):
    """Return ``(labels, metadata)`` from a file written by :func:`write_activation_map`."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise ValueError(f"{path}: missing metadata line")
    meta = json.loads(text[0][1:])
    if text[1].strip() != "vertex,label":
        raise ValueError(f"{path}: unexpected header {text[1]!r}")
    rows = np.array([[int(t) for t in ln.split(",")] for ln in text[2:] if ln.strip()],
                    dtype=np.int64).reshape(-1, 2)
    labels = np.zeros(rows[:, 0].max() + 1 if rows.size else 0, dtype=np.int64)
    labels[rows[:, 0]] = rows[:, 1]
    if not set(np.unique(labels)) <= {-1, 0, 1}:
        raise ValueError(f"{path}: labels must be -1, 0 or 1")
    return labels, meta
