"""Isolation forest anomaly detector, built from first principles.

Trees isolate points by recursive random axis-aligned splits; anomalies
isolate in fewer splits. The anomaly score for a query x is

    s(x) = 2 ** (-E[h(x)] / c(psi))

where h(x) is the path length to the external node reached by x (plus the
c(size) adjustment for truncated leaves), E[.] averages over trees, psi is
the subsample size each tree was grown on, and c(n) is the average
unsuccessful-search path length of a binary search tree with n points.

The decision threshold comes from an assumed anomaly fraction
(contamination): the (1 - C) quantile of the training scores, with a
strict ``score > threshold`` rule.

All randomness flows through the in-repo splitmix64 generator with
per-tree derived seeds, so seeded fits are identical across platforms and
across serial/parallel execution.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError
from .metrics import ConfusionMatrix, Metrics, compute_metrics
from .rng import SplitMix64, derive_seed

EULER_GAMMA = 0.5772156649

CONTAMINATION_GRID = (0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50)


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    subsample_size: int | None = None  # None -> min(256, n)
    rng_seed: int = 0
    contamination: float = 0.10

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not (0.0 < self.contamination <= 0.5):
            raise ValueError("contamination must be in (0, 0.5]")


@dataclass(frozen=True)
class External:
    size: int


@dataclass(frozen=True)
class Internal:
    split_feature: int
    split_value: float
    left: "Internal | External"
    right: "Internal | External"


@dataclass
class Forest:
    trees: list
    n_train: int
    n_features: int
    subsample_size: int
    params: ForestParams
    score_threshold: float = field(default=float("nan"))
    degenerate: bool = False
    train_scores: np.ndarray | None = None


def avg_path_length(n: int) -> float:
    """c(n): expected unsuccessful-search path length in a BST of n points."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


def _split_point(rng: SplitMix64, lo: float, hi: float) -> float | None:
    # Strictly inside (lo, hi); None when the interval has no interior floats.
    for _ in range(8):
        v = lo + rng.uniform() * (hi - lo)
        if lo < v < hi:
            return v
    return None


def _grow_tree(x: np.ndarray, rng: SplitMix64, depth: int, height_limit: int):
    n = x.shape[0]
    if depth >= height_limit or n <= 1:
        return External(size=n)
    mins = x.min(axis=0)
    maxs = x.max(axis=0)
    splittable = np.flatnonzero(mins < maxs)
    if splittable.size == 0:
        return External(size=n)
    feature = int(splittable[rng.randint(splittable.size)])
    value = _split_point(rng, float(mins[feature]), float(maxs[feature]))
    if value is None:
        return External(size=n)
    mask = x[:, feature] < value
    return Internal(
        split_feature=feature,
        split_value=value,
        left=_grow_tree(x[mask], rng, depth + 1, height_limit),
        right=_grow_tree(x[~mask], rng, depth + 1, height_limit),
    )


def _build_one(x: np.ndarray, psi: int, seed: int, tree_index: int):
    rng = SplitMix64(derive_seed(seed, tree_index))
    if psi < x.shape[0]:
        idx = rng.sample_indices(x.shape[0], psi)
        sub = x[np.asarray(idx, dtype=int)]
    else:
        sub = x
    height_limit = max(1, math.ceil(math.log2(psi)))
    return _grow_tree(sub, rng, 0, height_limit)


def fit(X, params: ForestParams, n_jobs: int = 1) -> Forest:
    """Grow the forest and set the contamination threshold from train scores."""
    x = np.asarray(X, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.shape[0] < 2:
        raise ValueError("need at least 2 training points")
    if not np.all(np.isfinite(x)):
        raise ValueError("training data must be finite")

    psi = params.subsample_size if params.subsample_size is not None else min(256, x.shape[0])
    psi = min(psi, x.shape[0])
    if psi < 2:
        raise ValueError("subsample size must be >= 2")

    indices = range(params.n_trees)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(lambda t: _build_one(x, psi, params.rng_seed, t), indices))
    else:
        trees = [_build_one(x, psi, params.rng_seed, t) for t in indices]

    forest = Forest(
        trees=trees,
        n_train=x.shape[0],
        n_features=x.shape[1],
        subsample_size=psi,
        params=params,
        degenerate=bool(np.all(x == x[0])),
    )
    forest.train_scores = np.array([score(forest, row) for row in x])
    forest.score_threshold = threshold_for(forest.train_scores, params.contamination)
    return forest


def threshold_for(train_scores: np.ndarray, contamination: float) -> float:
    """(1 - C) quantile of the training scores (linear interpolation)."""
    return float(np.quantile(np.asarray(train_scores, dtype=float), 1.0 - contamination))


def _path_length(tree, q: np.ndarray) -> float:
    depth = 0
    node = tree
    while isinstance(node, Internal):
        node = node.left if q[node.split_feature] < node.split_value else node.right
        depth += 1
    return depth + avg_path_length(node.size)


def score(forest: Forest, q) -> float:
    """Anomaly score in (0, 1); higher isolates faster, i.e. more anomalous."""
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != forest.n_features:
        raise DimensionMismatchError(
            f"query has {q.shape[0]} features, forest was trained on {forest.n_features}"
        )
    mean_path = sum(_path_length(t, q) for t in forest.trees) / len(forest.trees)
    return float(2.0 ** (-mean_path / avg_path_length(forest.subsample_size)))


def score_many(forest: Forest, X) -> np.ndarray:
    x = np.asarray(X, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    return np.array([score(forest, row) for row in x])


def predict(forest: Forest, q) -> int:
    """1 iff the anomaly score strictly exceeds the contamination threshold."""
    return int(score(forest, q) > forest.score_threshold)


def grid_search(train, eval_vectors, eval_labels, grid, params: ForestParams) -> tuple[float, Metrics]:
    """Pick the contamination value maximizing F1 on the evaluation set.

    The forest is fitted once; each grid value only re-derives the decision
    threshold from the stored training scores. Ties go to the smaller C.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("contamination grid must be non-empty")
    forest = fit(train, params)
    eval_scores = score_many(forest, eval_vectors)
    labels = np.asarray(eval_labels, dtype=int)

    best: tuple[float, Metrics] | None = None
    best_f1 = -1.0
    for c in sorted(grid):
        thr = threshold_for(forest.train_scores, c)
        pred = (eval_scores > thr).astype(int)
        cm = ConfusionMatrix(
            tp=int(np.sum((pred == 1) & (labels == 1))),
            fp=int(np.sum((pred == 1) & (labels == 0))),
            fn=int(np.sum((pred == 0) & (labels == 1))),
            tn=int(np.sum((pred == 0) & (labels == 0))),
        )
        metrics = compute_metrics(cm)
        if metrics.f1 > best_f1:
            best_f1 = metrics.f1
            best = (c, metrics)
    assert best is not None
    return best
