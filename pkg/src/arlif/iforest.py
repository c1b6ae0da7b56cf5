"""Isolation forest: random trees on subsamples, per-tree anomaly probabilities.

Trees are stored as flattened parallel arrays (children always at larger
indices than their parent) so traversal is a tight index-chasing loop and
serialization is a fixed-width record dump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData

EULER_GAMMA = 0.5772156649


def c_factor(n: int) -> float:
    """Average unsuccessful-BST search path over n points.

    0 for n <= 1, exactly 1 for n == 2, and the standard
    2(ln(n-1) + gamma) - 2(n-1)/n approximation for larger n.
    """
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    nm1 = n - 1.0
    return 2.0 * (math.log(nm1) + EULER_GAMMA) - 2.0 * nm1 / n


@dataclass
class IsolationTree:
    """Flattened tree: node j is a leaf iff feature[j] < 0.

    Internal nodes use (feature, threshold, left, right); leaves use
    (size, depth). The unused half of each record is canonically zeroed
    (feature = -1, threshold = 0.0, left = right = -1 for leaves) so the
    serialized form is unique.
    """

    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    size: list[int]
    depth: list[int]

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


def build_tree(subsample, rng: np.random.Generator, height_limit: int) -> IsolationTree:
    """Grow one isolation tree over the subsample.

    A node becomes a leaf when it holds <= 1 point, sits at the height
    limit, or is constant in every column; otherwise split on a uniformly
    random non-constant column at a uniform threshold between that
    column's min and max, strictly-less going left.
    """
    X = np.asarray(subsample, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("subsample must be a non-empty 2-d array of vectors")
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    size: list[int] = []
    depth: list[int] = []

    def grow(idx: np.ndarray, d: int) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(0)
        depth.append(0)
        if idx.size <= 1 or d >= height_limit:
            size[node] = int(idx.size)
            depth[node] = d
            return node
        pts = X[idx]
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        splittable = np.nonzero(hi > lo)[0]
        if splittable.size == 0:
            size[node] = int(idx.size)
            depth[node] = d
            return node
        col = int(splittable[rng.integers(splittable.size)])
        t = float(rng.uniform(lo[col], hi[col]))
        mask = pts[:, col] < t
        li = grow(idx[mask], d + 1)
        ri = grow(idx[~mask], d + 1)
        feature[node] = col
        threshold[node] = t
        left[node] = li
        right[node] = ri
        return node

    grow(np.arange(X.shape[0]), 0)
    return IsolationTree(feature, threshold, left, right, size, depth)


@dataclass
class IsolationForest:
    trees: list[IsolationTree]
    psi: int  # effective subsample size
    c_psi: float
    height_limit: int
    n_features: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def build_forest(data, T: int, psi: int, seed: int) -> IsolationForest:
    """Build T trees, each on a without-replacement subsample of min(psi, n).

    Every tree draws from its own random stream, derived deterministically
    from (seed, tree index), so construction order (or parallelism) cannot
    change the result.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if psi < 2:
        raise ValueError(f"psi must be >= 2, got {psi}")
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InsufficientData("forest construction needs at least 2 points")
    n = X.shape[0]
    eff_psi = min(psi, n)
    height_limit = int(math.ceil(math.log2(eff_psi)))
    trees = []
    for i in range(T):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        idx = rng.choice(n, size=eff_psi, replace=False)
        trees.append(build_tree(X[idx], rng, height_limit))
    return IsolationForest(
        trees=trees,
        psi=eff_psi,
        c_psi=c_factor(eff_psi),
        height_limit=height_limit,
        n_features=int(X.shape[1]),
    )


def path_length(tree: IsolationTree, x) -> float:
    """Depth of the leaf reached by x, plus c_factor(leaf size)."""
    feature = tree.feature
    threshold = tree.threshold
    left = tree.left
    right = tree.right
    j = 0
    f = feature[0]
    while f >= 0:
        j = left[j] if x[f] < threshold[j] else right[j]
        f = feature[j]
    return tree.depth[j] + c_factor(tree.size[j])


def tree_proba(tree: IsolationTree, x, c_psi: float) -> float:
    """Per-tree anomaly probability 2^(-h/c_psi), always in (0, 1]."""
    return 2.0 ** (-path_length(tree, x) / c_psi)


def forest_score(forest: IsolationForest, x) -> float:
    """Classical forest score 2^(-mean path length / c_psi)."""
    total = 0.0
    for tree in forest.trees:
        total += path_length(tree, x)
    return 2.0 ** (-(total / len(forest.trees)) / forest.c_psi)
