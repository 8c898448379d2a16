"""Random forest regression: bagged CART trees with variance-reduction splits.

Split search is exact (every midpoint between consecutive distinct values)
and ties go to the lowest feature index, then the lowest threshold, so a
single unbagged tree is reproducible by brute-force enumeration. The growth
loop runs under numba without the GIL; trees can be trained on threads and
still give the same model as a sequential fit.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numba
import numpy as np

from .errors import DimensionMismatch, InsufficientData, InvalidConfig, IoError, NoValidSplit, SchemaMismatch

FORMAT = "batterylife.forest"
VERSION = 1

# Two gains closer than this (relative to the node's target variance) are a tie.
TIE_TOL = 1e-12

_U64 = np.uint64


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 50
    max_depth: int = 16
    min_samples_leaf: int = 5
    feature_subsample: int | None = None
    bootstrap: bool = True
    seed: int = 0

    def validate(self, input_dim: int | None = None) -> "ForestConfig":
        if self.n_trees < 1:
            raise InvalidConfig("n_trees must be positive")
        if self.max_depth < 1:
            raise InvalidConfig("max_depth must be positive")
        if self.min_samples_leaf < 1:
            raise InvalidConfig("min_samples_leaf must be positive")
        if self.feature_subsample is not None:
            hi = input_dim if input_dim is not None else self.feature_subsample
            if not 1 <= self.feature_subsample <= hi:
                raise InvalidConfig(f"feature_subsample must lie in [1, {hi}]")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer")
        return self


class Split(NamedTuple):
    feature: int
    threshold: float
    gain: float


@dataclass(eq=False)
class RegressionTree:
    """Flat node arrays; ``feature[i] == -1`` marks a leaf.

    ``value`` is the leaf mean for leaves and 0 for internal nodes.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return _predict_tree(self.feature, self.threshold, self.left, self.right, self.value,
                             np.ascontiguousarray(x, dtype=np.float64))


@dataclass(eq=False)
class ForestModel:
    config: ForestConfig
    trees: list
    input_dim: int
    train_range: tuple = field(default=(np.nan, np.nan))

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "config": asdict(self.config),
            "input_dim": self.input_dim,
            "train_range": list(self.train_range),
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                    "n_samples": t.n_samples.tolist(),
                }
                for t in self.trees
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ForestModel":
        if doc.get("format") != FORMAT or doc.get("version") != VERSION:
            raise SchemaMismatch(f"not a {FORMAT} v{VERSION} document")
        trees = [
            RegressionTree(
                np.array(t["feature"], dtype=np.int64),
                np.array(t["threshold"], dtype=np.float64),
                np.array(t["left"], dtype=np.int64),
                np.array(t["right"], dtype=np.int64),
                np.array(t["value"], dtype=np.float64),
                np.array(t["n_samples"], dtype=np.int64),
            )
            for t in doc["trees"]
        ]
        return cls(ForestConfig(**doc["config"]), trees, int(doc["input_dim"]), tuple(doc["train_range"]))


# --------------------------------------------------------------------------
# numba kernels


@numba.njit(cache=True, nogil=True)
def _splitmix64(state):
    z = state + _U64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


@numba.njit(cache=True, nogil=True)
def _pick_features(d, k, seed, node):
    """First k entries of a seeded Fisher-Yates shuffle of range(d), sorted."""
    perm = np.arange(d)
    state = _splitmix64(_U64(seed) ^ (_U64(node) * _U64(0xD1B54A32D192ED03)))
    for i in range(k):
        state = _splitmix64(state)
        j = i + np.int64(state % _U64(d - i))
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    return np.sort(perm[:k])


@numba.njit(cache=True, nogil=True)
def _best_split_kernel(X, y, idx, features, min_leaf, tie_tol):
    """Return (feature, threshold, gain); feature -1 when nothing splits."""
    n = idx.size
    total = 0.0
    for i in range(n):
        total += y[idx[i]]
    mean = total / n
    ys_all = np.empty(n)
    sq = 0.0
    for i in range(n):
        ys_all[i] = y[idx[i]] - mean
        sq += ys_all[i] * ys_all[i]
    var = sq / n
    tol = tie_tol * var
    best_f = -1
    best_t = 0.0
    best_gain = 0.0
    vals = np.empty(n)
    ys = np.empty(n)
    for fi in range(features.size):
        f = features[fi]
        for i in range(n):
            vals[i] = X[idx[i], f]
        order = np.argsort(vals, kind="mergesort")
        s_total = 0.0
        for i in range(n):
            ys[i] = ys_all[order[i]]
            s_total += ys[i]
        left = 0.0
        for i in range(n - 1):
            left += ys[i]
            nl = i + 1
            nr = n - nl
            if nr < min_leaf:
                break
            if nl < min_leaf:
                continue
            v = vals[order[i]]
            vn = vals[order[i + 1]]
            if not vn > v:
                continue
            right = s_total - left
            gain = (left * left / nl + right * right / nr - s_total * s_total / n) / n
            if gain > best_gain + tol:
                t = 0.5 * (v + vn)
                if t >= vn:
                    t = v
                best_gain = gain
                best_f = f
                best_t = t
    if best_f >= 0 and not best_gain > tol:
        best_f = -1
    return best_f, best_t, best_gain


@numba.njit(cache=True, nogil=True)
def _grow(X, y, samples, max_depth, min_leaf, n_sub, seed, tie_tol):
    """Grow one tree depth-first over ``samples`` (reordered in place).

    Returns node arrays plus (start, end) ranges into ``samples`` so the
    caller can compute leaf means over the rows each leaf received.
    """
    n = samples.size
    d = X.shape[1]
    cap = 2 * n + 1
    feat = np.full(cap, -1, dtype=np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    start = np.zeros(cap, dtype=np.int64)
    end = np.zeros(cap, dtype=np.int64)
    depth = np.zeros(cap, dtype=np.int64)
    stack = np.empty(cap, dtype=np.int64)
    all_features = np.arange(d)
    buf = np.empty(n, dtype=np.int64)

    start[0] = 0
    end[0] = n
    n_nodes = 1
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        s = start[node]
        e = end[node]
        m = e - s
        if depth[node] >= max_depth or m < 2 * min_leaf:
            continue
        idx = samples[s:e]
        lo = y[idx[0]]
        hi = lo
        for i in range(1, m):
            v = y[idx[i]]
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        if hi == lo:
            continue
        if n_sub < d:
            cand = _pick_features(d, n_sub, seed, node)
        else:
            cand = all_features
        f, t, gain = _best_split_kernel(X, y, idx, cand, min_leaf, tie_tol)
        if f < 0:
            continue
        # stable partition: left rows keep their order, then right rows
        nl = 0
        for i in range(m):
            if X[idx[i], f] <= t:
                buf[nl] = idx[i]
                nl += 1
        nr = 0
        for i in range(m):
            if not X[idx[i], f] <= t:
                buf[nl + nr] = idx[i]
                nr += 1
        for i in range(m):
            samples[s + i] = buf[i]
        feat[node] = f
        thr[node] = t
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        start[lc] = s
        end[lc] = s + nl
        start[rc] = s + nl
        end[rc] = e
        depth[lc] = depth[node] + 1
        depth[rc] = depth[node] + 1
        # right first so the left subtree is expanded first
        stack[sp] = rc
        sp += 1
        stack[sp] = lc
        sp += 1
    return (feat[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), start[:n_nodes].copy(), end[:n_nodes].copy())


@numba.njit(cache=True, nogil=True)
def _predict_tree(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


# --------------------------------------------------------------------------


def _check_xy(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch("X must be 2-D")
    if y.shape != (X.shape[0],):
        raise DimensionMismatch(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise InsufficientData("X and y must be finite")
    return X, y


def best_split(X, y, candidate_features=None, min_samples_leaf: int = 1) -> Split:
    """Variance-reduction split over the candidate features.

    Gain is ``Var(y) - nL/n Var(yL) - nR/n Var(yR)`` (population variances).
    Raises :class:`NoValidSplit` when no threshold yields positive gain
    while leaving ``min_samples_leaf`` rows on each side.
    """
    X, y = _check_xy(X, y)
    n, d = X.shape
    if min_samples_leaf < 1:
        raise InvalidConfig("min_samples_leaf must be positive")
    if n < 2 * min_samples_leaf:
        raise NoValidSplit(f"{n} rows cannot hold two leaves of {min_samples_leaf}")
    if candidate_features is None:
        candidate_features = range(d)
    cand = np.array(sorted(set(int(f) for f in candidate_features)), dtype=np.int64)
    if cand.size == 0 or cand.min() < 0 or cand.max() >= d:
        raise DimensionMismatch("candidate feature index out of range")
    f, t, gain = _best_split_kernel(X, y, np.arange(n, dtype=np.int64), cand,
                                    int(min_samples_leaf), TIE_TOL)
    if f < 0:
        raise NoValidSplit("no split reduces variance")
    return Split(int(f), float(t), float(gain))


def tree_seed(seed: int, tree_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(tree_index)])


def fit_tree(X, y, samples, config: ForestConfig, tree_index: int = 0) -> RegressionTree:
    """Grow one tree on the rows listed in ``samples`` (duplicates allowed)."""
    d = X.shape[1]
    n_sub = d if config.feature_subsample is None else int(config.feature_subsample)
    node_seed = int(tree_seed(config.seed, tree_index).generate_state(1, np.uint64)[0])
    samples = np.array(samples, dtype=np.int64)
    feat, thr, left, right, start, end = _grow(
        X, y, samples, int(config.max_depth), int(config.min_samples_leaf), n_sub,
        np.uint64(node_seed), TIE_TOL,
    )
    value = np.zeros(feat.size)
    for i in np.flatnonzero(feat < 0):
        value[i] = y[samples[start[i]:end[i]]].mean()
    return RegressionTree(feat, thr, left, right, value, end - start)


def _bootstrap(n: int, config: ForestConfig, tree_index: int) -> np.ndarray:
    if not config.bootstrap:
        return np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(tree_seed(config.seed, tree_index))
    return np.sort(rng.integers(0, n, size=n))


def fit_forest(X, y, config: ForestConfig = ForestConfig(), n_jobs: int = 1) -> ForestModel:
    """Train ``config.n_trees`` trees; tree t uses randomness seeded by (seed, t)."""
    X, y = _check_xy(X, y)
    n, d = X.shape
    config.validate(d)
    if n < 2 * config.min_samples_leaf or n == 0:
        raise InsufficientData(f"need at least {2 * config.min_samples_leaf} rows, got {n}")

    def one(t):
        return fit_tree(X, y, _bootstrap(n, config, t), config, t)

    if n_jobs == 1:
        trees = [one(t) for t in range(config.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(one, range(config.n_trees)))
    return ForestModel(config, trees, d, (float(y.min()), float(y.max())))


def predict_forest(model: ForestModel, X) -> np.ndarray:
    """Mean of the per-tree predictions."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    if X.shape[1] != model.input_dim:
        raise DimensionMismatch(f"expected {model.input_dim} inputs, got {X.shape[1]}")
    base = model.trees[0].predict(X)
    lo = base.copy()
    hi = base.copy()
    acc = np.zeros(X.shape[0])
    for tree in model.trees[1:]:
        p = tree.predict(X)
        acc += p - base
        np.minimum(lo, p, out=lo)
        np.maximum(hi, p, out=hi)
    # anchoring on the first tree makes identical trees average exactly
    return np.clip(base + acc / len(model.trees), lo, hi)


def save_model(model: ForestModel, path) -> None:
    try:
        Path(path).write_text(json.dumps(model.to_dict()))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_model(path) -> ForestModel:
    try:
        return ForestModel.from_dict(json.loads(Path(path).read_text()))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
