"""K-means pseudo-label generation over multiple feature views, plus partition
agreement diagnostics.

The clusterer is deliberately self-contained: seeded k-means++ initialization,
Lloyd iterations run to an exact fixed point, empty clusters repaired by
donating the globally farthest point, best of several restarts by SSE.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError


@dataclass(frozen=True)
class ClusterConfig:
    """Shared settings for every clustering view of one run."""

    num_clusters: int = 700
    max_iter: int = 300
    restarts: int = 10
    seed: int = 0
    normalize: bool = True

    def __post_init__(self):
        if self.num_clusters < 1 or self.max_iter < 1 or self.restarts < 1:
            raise ConfigError("cluster counts, iterations and restarts must be positive")


@dataclass
class PseudoLabelSets:
    """Integer labels per sample for the global view and each part view.

    ``labels[:, 0]`` is the global view, ``labels[:, j]`` the j-th part view.
    """

    labels: np.ndarray
    num_clusters: int

    @property
    def num_views(self) -> int:
        return self.labels.shape[1]

    def view(self, j: int) -> np.ndarray:
        return self.labels[:, j]


def l2_normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.maximum(norms, 1e-12)


def _kmeans_pp_init(points, k, rng):
    n = len(points)
    centers = np.empty((k, points.shape[1]), dtype=points.dtype)
    centers[0] = points[rng.integers(n)]
    closest = ((points - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest / total)
        centers[i] = points[idx]
        closest = np.minimum(closest, ((points - centers[i]) ** 2).sum(axis=1))
    return centers


def _fast_sq_dists(points, centers):
    # expansion trick, matmul-backed; clipped so roundoff cannot go negative
    sq = (
        (points**2).sum(axis=1)[:, None]
        + (centers**2).sum(axis=1)[None, :]
        - 2.0 * points @ centers.T
    )
    return np.maximum(sq, 0.0)


def _exact_sq_dists(points, centers, block=512):
    out = np.empty((len(points), len(centers)))
    for s in range(0, len(points), block):
        diff = points[s : s + block, None, :] - centers[None, :, :]
        out[s : s + block] = (diff * diff).sum(axis=2)
    return out


def _repair_empty(labels, sq, k):
    """Move the point farthest from its own centroid into each empty cluster."""
    changed = False
    counts = np.bincount(labels, minlength=k)
    for empty in np.flatnonzero(counts == 0):
        own_dist = sq[np.arange(len(labels)), labels].copy()
        own_dist[counts[labels] < 2] = -np.inf  # do not drain singleton clusters
        donor = int(own_dist.argmax())
        counts[labels[donor]] -= 1
        labels[donor] = empty
        counts[empty] += 1
        changed = True
    return changed


def _means(points, labels, k):
    return np.stack([points[labels == c].mean(axis=0) for c in range(k)])


def _lloyd(points, centers, max_iter, k):
    # fast distances drive the iterations; convergence is confirmed against
    # the exact pairwise metric so the returned state is a true fixed point
    prev = None
    labels = None
    for _ in range(max_iter):
        sq = _fast_sq_dists(points, centers)
        labels = sq.argmin(axis=1)
        repaired = _repair_empty(labels, sq, k)
        if not repaired and prev is not None and np.array_equal(labels, prev):
            exact_sq = _exact_sq_dists(points, centers)
            exact_labels = exact_sq.argmin(axis=1)
            exact_repaired = _repair_empty(exact_labels, exact_sq, k)
            if not exact_repaired and np.array_equal(exact_labels, labels):
                break
            labels = exact_labels
        centers = _means(points, labels, k)
        prev = labels
    sse = ((points - centers[labels]) ** 2).sum()
    return labels, centers, sse


def kmeans(points, k: int, *, max_iter: int = 300, restarts: int = 10, seed: int = 0):
    """Seeded k-means; returns (labels, centroids).

    At convergence every point sits with its nearest centroid and every
    centroid equals the mean of its members. Identical seeds give identical
    results.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if k < 1:
        raise InputError("k must be >= 1")
    if k > len(points):
        raise InputError(f"k={k} exceeds the {len(points)} available samples")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        init = _kmeans_pp_init(points, k, rng)
        labels, centers, sse = _lloyd(points, init, max_iter, k)
        if best is None or sse < best[2]:
            best = (labels, centers, sse)
    return best[0], best[1]


def build_pseudo_labels(global_feats, part_feats, config: ClusterConfig) -> PseudoLabelSets:
    """Cluster the global view and every part view with one shared cluster count.

    All views are clustered with the same seed so identical features yield
    identical label sets.
    """
    views = [np.asarray(global_feats)] + [np.asarray(f) for f in part_feats]
    n = len(views[0])
    if any(len(v) != n for v in views):
        raise InputError("all feature views must cover the same samples")
    if config.num_clusters > n:
        raise InputError(
            f"{config.num_clusters} clusters requested for only {n} samples"
        )
    labels = np.empty((n, len(views)), dtype=np.int64)
    for j, feats in enumerate(views):
        if config.normalize:
            feats = l2_normalize_rows(feats.astype(np.float64))
        view_labels, _ = kmeans(
            feats,
            config.num_clusters,
            max_iter=config.max_iter,
            restarts=config.restarts,
            seed=config.seed,
        )
        labels[:, j] = view_labels
    return PseudoLabelSets(labels=labels, num_clusters=config.num_clusters)


def _comb2(x):
    return x * (x - 1) / 2.0


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two partitions of the same samples."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError("label arrays must be 1-D and equally long")
    n = len(a)
    if n < 2:
        raise InputError("need at least two samples")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    contingency = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(contingency, (ai, bi), 1)
    sum_cells = _comb2(contingency).sum()
    sum_rows = _comb2(contingency.sum(axis=1)).sum()
    sum_cols = _comb2(contingency.sum(axis=0)).sum()
    expected = sum_rows * sum_cols / _comb2(n)
    max_index = (sum_rows + sum_cols) / 2.0
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def cluster_purity(labels, truth) -> float:
    """Fraction of samples whose cluster's majority ground-truth id matches."""
    labels = np.asarray(labels)
    truth = np.asarray(truth)
    if labels.shape != truth.shape:
        raise InputError("labels and truth must align")
    correct = 0
    for c in np.unique(labels):
        members = truth[labels == c]
        correct += np.bincount(members).max()
    return correct / len(labels)
