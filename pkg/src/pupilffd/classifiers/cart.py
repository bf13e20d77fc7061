"""CART decision trees (classification and regression) on numpy arrays.

Trees are stored as flat parallel node arrays so prediction can route
whole sample batches level by level. Split search is vectorised: every
candidate feature is argsorted once per node and all thresholds are
scored with cumulative sums. A node splits on the (feature, threshold)
pair with the lowest weighted child impurity; ties resolve to the
earlier candidate feature, then the lower threshold, which keeps tree
growth deterministic for a fixed random stream.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MIN_GAIN = 1e-12


@dataclass
class Tree:
    """Flat node arrays; ``feature[i] < 0`` marks node ``i`` as a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, K) class distributions or (n_nodes,) regression values

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index for every row of X."""
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            live = np.flatnonzero(self.feature[node] >= 0)
            if len(live) == 0:
                return node
            cur = node[live]
            goes_left = X[live, self.feature[cur]] <= self.threshold[cur]
            node[live] = np.where(goes_left, self.left[cur], self.right[cur])

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def to_json(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(v) for v in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Tree":
        return cls(
            feature=np.asarray(obj["feature"], dtype=np.int64),
            threshold=np.asarray(obj["threshold"], dtype=np.float64),
            left=np.asarray(obj["left"], dtype=np.int64),
            right=np.asarray(obj["right"], dtype=np.int64),
            value=np.asarray(obj["value"], dtype=np.float64),
        )


@dataclass
class _Builder:
    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def add(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(None)
        return len(self.feature) - 1

    def finish(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.asarray(self.value, dtype=np.float64),
        )


def _counts_log_term(counts: np.ndarray) -> np.ndarray:
    """sum over classes of c*log2(c), with 0*log2(0) treated as 0."""
    safe = np.where(counts > 0, counts, 1.0)
    return (counts * np.log2(safe)).sum(axis=-1)


def _pick_best(weighted: np.ndarray, valid: np.ndarray) -> tuple[int, int] | None:
    """Earliest (feature, position) with the minimal weighted impurity."""
    weighted = np.where(valid, weighted, np.inf)
    by_feature = weighted.T  # (f, n-1): feature-major tie-breaking
    flat = int(np.argmin(by_feature))
    if not np.isfinite(by_feature.flat[flat]):
        return None
    f_local, pos = divmod(flat, weighted.shape[0])
    return f_local, pos


def _split_candidates(Xs: np.ndarray, min_samples_leaf: int):
    """Shared sorting and validity bookkeeping for both criteria."""
    n = Xs.shape[0]
    order = np.argsort(Xs, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(Xs, order, axis=0)
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    valid = (sorted_vals[1:] > sorted_vals[:-1])
    valid &= (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
    return order, sorted_vals, n_left, n_right, valid


def _threshold(a: float, b: float) -> float:
    mid = 0.5 * (a + b)
    # Adjacent floats can round the midpoint onto b; fall back to a so the
    # `x <= threshold` rule reproduces the intended partition.
    return a if mid >= b else mid


def _best_split_entropy(Xs: np.ndarray, onehot: np.ndarray,
                        min_samples_leaf: int) -> tuple[int, float] | None:
    """Lowest-entropy split of the candidate columns, or None."""
    n = Xs.shape[0]
    if n < 2:
        return None
    order, sorted_vals, n_left, n_right, valid = _split_candidates(Xs, min_samples_leaf)
    cum = np.cumsum(onehot[order], axis=0)  # (n, f, K)
    total = cum[-1]
    left = cum[:-1]
    right = total[None, :, :] - left
    # n_l*H_l + n_r*H_r, using n*H = n*log2(n) - sum(c*log2(c)).
    scaled = (n_left * np.log2(n_left) - _counts_log_term(left)
              + n_right * np.log2(n_right) - _counts_log_term(right))
    parent_scaled = n * np.log2(n) - _counts_log_term(total[0])
    best = _pick_best(scaled, valid)
    if best is None:
        return None
    f_local, pos = best
    if parent_scaled - scaled[pos, f_local] <= _MIN_GAIN:
        return None
    return f_local, _threshold(sorted_vals[pos, f_local], sorted_vals[pos + 1, f_local])


def _best_split_sse(Xs: np.ndarray, y: np.ndarray,
                    min_samples_leaf: int) -> tuple[int, float] | None:
    """Lowest summed-squared-error split of the candidate columns, or None."""
    n = Xs.shape[0]
    if n < 2:
        return None
    order, sorted_vals, n_left, n_right, valid = _split_candidates(Xs, min_samples_leaf)
    ys = y[order]  # (n, f)
    cy = np.cumsum(ys, axis=0)
    cy2 = np.cumsum(ys * ys, axis=0)
    sse_left = cy2[:-1] - cy[:-1] ** 2 / n_left
    sse_right = (cy2[-1] - cy2[:-1]) - (cy[-1] - cy[:-1]) ** 2 / n_right
    scaled = sse_left + sse_right
    parent = float(cy2[-1, 0] - cy[-1, 0] ** 2 / n)
    best = _pick_best(scaled, valid)
    if best is None:
        return None
    f_local, pos = best
    if parent - scaled[pos, f_local] <= _MIN_GAIN:
        return None
    return f_local, _threshold(sorted_vals[pos, f_local], sorted_vals[pos + 1, f_local])


def grow_tree(X: np.ndarray, y: np.ndarray, *, mode: str, n_classes: int = 0,
              max_depth: int, min_samples_split: int, min_samples_leaf: int,
              max_features: int, rng: np.random.Generator) -> Tree:
    """Grow one tree on (X, y).

    ``mode`` selects entropy-impurity classification (``"entropy"``) or
    squared-error regression (``"squared_error"``). Classification
    targets are integer class indices in ``[0, n_classes)``; leaf values
    are class-frequency distributions. Regression leaves store the mean
    target. ``max_features`` candidate features are redrawn at every
    node from ``rng``.
    """
    if mode not in ("entropy", "squared_error"):
        raise ValueError(f"unknown tree mode {mode!r}")
    n_features = X.shape[1]
    mtry = min(max_features, n_features)
    onehot = None
    if mode == "entropy":
        if n_classes < 1:
            raise ValueError("classification trees need n_classes >= 1")
        onehot = np.zeros((len(y), n_classes), dtype=np.float64)
        onehot[np.arange(len(y)), y] = 1.0
    builder = _Builder()

    def node_value(idx: np.ndarray) -> np.ndarray | float:
        if mode == "entropy":
            return onehot[idx].sum(axis=0) / len(idx)
        return float(y[idx].mean())

    def is_pure(idx: np.ndarray) -> bool:
        first = y[idx[0]]
        return bool(np.all(y[idx] == first))

    def recurse(idx: np.ndarray, depth: int) -> int:
        node = builder.add()
        builder.value[node] = node_value(idx)
        if depth >= max_depth or len(idx) < min_samples_split or is_pure(idx):
            return node
        feats = rng.choice(n_features, size=mtry, replace=False)
        Xs = X[np.ix_(idx, feats)]
        if mode == "entropy":
            split = _best_split_entropy(Xs, onehot[idx], min_samples_leaf)
        else:
            split = _best_split_sse(Xs, y[idx], min_samples_leaf)
        if split is None:
            return node
        f_local, threshold = split
        f_global = int(feats[f_local])
        goes_left = X[idx, f_global] <= threshold
        builder.feature[node] = f_global
        builder.threshold[node] = float(threshold)
        builder.left[node] = recurse(idx[goes_left], depth + 1)
        builder.right[node] = recurse(idx[~goes_left], depth + 1)
        return node

    recurse(np.arange(len(X), dtype=np.int64), 0)
    return builder.finish()
