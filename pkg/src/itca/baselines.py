"""Clustering baselines: combine classes whose centers cluster together.

Both baselines need the true number of combined classes up front.
"""
from __future__ import annotations

import numpy as np

from .data import Dataset
from .partitions import Partition, canonicalize

__all__ = ["LINKAGES", "class_centers", "kmeans_combine", "hierarchical_combine", "kmeans"]

LINKAGES = ("single", "complete", "average")


def class_centers(ds: Dataset) -> np.ndarray:
    """Row k is the mean feature vector of observed class k+1."""
    sums = np.zeros((ds.k0, ds.d))
    np.add.at(sums, ds.labels - 1, ds.features)
    return sums / np.bincount(ds.labels, minlength=ds.k0 + 1)[1:, None]


def _check_k(k_star: int, k0: int) -> None:
    if not 1 <= k_star <= k0:
        raise ValueError(f"k_star must lie in 1..{k0}, got {k_star}")


def _plusplus(points, k, rng):
    n = points.shape[0]
    idx = [int(rng.integers(n))]
    d2 = ((points - points[idx[0]]) ** 2).sum(1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # every point coincides with a chosen center; take unused rows in order
            rest = [i for i in range(n) if i not in idx]
            nxt = rest[0]
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        idx.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(1))
    return points[idx].copy()


def kmeans(points, k: int, seed: int = 0, n_init: int = 10, max_iter: int = 300,
           max_reseeds: int = 10) -> tuple[np.ndarray, float]:
    """Lloyd's algorithm from k-means++ starts; returns (labels 0..k-1, inertia)."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError("k must lie in 1..n")
    rng = np.random.default_rng(seed)
    best, best_inertia = None, np.inf
    for _ in range(n_init):
        centers = _plusplus(points, k, rng)
        for _ in range(max_iter):
            d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
            lab = np.argmin(d2, axis=1)
            counts = np.bincount(lab, minlength=k)
            reseeds = 0
            while np.any(counts == 0):
                # move an empty center onto the point farthest from its center
                if reseeds >= max_reseeds:
                    raise RuntimeError("k-means kept producing empty clusters")
                reseeds += 1
                empty = int(np.flatnonzero(counts == 0)[0])
                far = int(np.argmax(d2[np.arange(n), lab]))
                centers[empty] = points[far]
                d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
                lab = np.argmin(d2, axis=1)
                counts = np.bincount(lab, minlength=k)
            new = np.array([points[lab == j].mean(0) for j in range(k)])
            if np.allclose(new, centers, rtol=0, atol=1e-12):
                centers = new
                break
            centers = new
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        lab = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), lab].sum())
        if inertia < best_inertia - 1e-12:
            best, best_inertia = lab, inertia
    return best, best_inertia


def kmeans_combine(ds: Dataset, k_star: int, seed: int = 0) -> Partition:
    """Cluster the class centers into ``k_star`` groups with k-means."""
    _check_k(k_star, ds.k0)
    lab, _ = kmeans(class_centers(ds), k_star, seed)
    return canonicalize(lab + 1)


def _agglomerate(points: np.ndarray, k_star: int, linkage: str) -> np.ndarray:
    n = points.shape[0]
    dist = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(-1))
    clusters = [[i] for i in range(n)]
    while len(clusters) > k_star:
        best, pair = np.inf, None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                block = dist[np.ix_(clusters[a], clusters[b])]
                if linkage == "single":
                    v = block.min()
                elif linkage == "complete":
                    v = block.max()
                else:
                    v = block.mean()
                # strict < keeps the lowest-index pair on ties
                if v < best:
                    best, pair = v, (a, b)
        a, b = pair
        clusters[a] = sorted(clusters[a] + clusters[b])
        del clusters[b]
    lab = np.empty(n, dtype=np.int64)
    for c, members in enumerate(clusters):
        lab[members] = c
    return lab


def hierarchical_combine(ds: Dataset, k_star: int, linkage: str = "average") -> Partition:
    """Agglomerative clustering of the class centers, cut at ``k_star`` groups."""
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {', '.join(LINKAGES)}")
    _check_k(k_star, ds.k0)
    return canonicalize(_agglomerate(class_centers(ds), k_star, linkage) + 1)
