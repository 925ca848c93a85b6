"""k-means over activation maps and the clustering quality metrics
(silhouette, Davies-Bouldin, Calinski-Harabasz, within-cluster variance,
plus accuracy/NMI against ground truth)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .multilayer import ChemInitConfig, LayerStack, multilayer_factorize
from .nmf import AlphaNmfConfig
from .periodicity import Spectrogram
from .rng import make_rng

__all__ = [
    "ClusterAssignment",
    "ClusterScores",
    "kmeans",
    "internal_scores",
    "accuracy_hungarian",
    "nmi",
    "chem_cluster_pipeline",
    "ClusterPipelineResult",
]


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    k: int
    centroids: np.ndarray
    inertia: float


@dataclass
class ClusterScores:
    silhouette: float
    davies_bouldin: float
    calinski_harabasz: float
    variance: float
    acc: float | None = None
    nmi: float | None = None

    def to_dict(self) -> dict:
        d = {
            "silhouette": self.silhouette,
            "davies_bouldin": self.davies_bouldin,
            "calinski_harabasz": self.calinski_harabasz,
            "variance": self.variance,
        }
        if self.acc is not None:
            d["acc"] = self.acc
        if self.nmi is not None:
            d["nmi"] = self.nmi
        return d


def _pairwise_sq(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def kmeans(points, k: int, seed: int = 0, max_iter: int = 300) -> ClusterAssignment:
    """Lloyd's algorithm with deterministic greedy farthest-point
    initialization from a seeded starting point.

    Empty clusters are repaired by reseeding at the point farthest from
    its assigned centroid. Iterates until the assignment reaches a fixed
    point or max_iter.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a non-empty 2-D array (samples x features)")
    n = pts.shape[0]
    if not (1 <= k <= n):
        raise ValueError(f"k must be in [1, {n}], got {k}")

    rng = make_rng(seed)
    first = int(rng.integers(n))
    chosen = [first]
    d2 = np.sum((pts - pts[first]) ** 2, axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((pts - pts[nxt]) ** 2, axis=1))
    centers = pts[chosen].copy()

    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        dist = _pairwise_sq(pts, centers)
        new_labels = np.argmin(dist, axis=1)
        for j in range(k):
            members = pts[new_labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
            else:
                worst = int(np.argmax(dist[np.arange(n), new_labels]))
                centers[j] = pts[worst]
                new_labels[worst] = j
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    inertia = float(_pairwise_sq(pts, centers)[np.arange(n), labels].sum())
    return ClusterAssignment(labels=labels, k=k, centroids=centers, inertia=inertia)


def internal_scores(points, labels) -> ClusterScores:
    """Standard Euclidean internal quality metrics.

    variance is the mean over clusters of each cluster's mean squared
    distance to its centroid. Requires at least two non-empty clusters.
    """
    pts = np.asarray(points, dtype=float)
    lab = np.asarray(labels, dtype=int)
    if pts.shape[0] != lab.shape[0]:
        raise ValueError("points and labels must have equal length")
    uniq = np.unique(lab)
    k = len(uniq)
    if k < 2:
        raise ValueError("need at least two clusters")
    n = pts.shape[0]
    centroids = np.stack([pts[lab == c].mean(axis=0) for c in uniq])
    sizes = np.array([(lab == c).sum() for c in uniq])

    # silhouette (singletons contribute 0)
    diff = pts[:, None, :] - pts[None, :, :]
    dmat = np.sqrt(np.einsum("ijd,ijd->ij", diff, diff))
    sil_vals = np.zeros(n)
    for i in range(n):
        same = lab == lab[i]
        n_same = same.sum()
        if n_same <= 1:
            sil_vals[i] = 0.0
            continue
        a = dmat[i, same].sum() / (n_same - 1)
        b = min(
            dmat[i, lab == c].mean() for c in uniq if c != lab[i]
        )
        sil_vals[i] = 0.0 if max(a, b) == 0 else (b - a) / max(a, b)
    silhouette = float(sil_vals.mean())

    # Davies-Bouldin
    scatters = np.array(
        [
            np.sqrt(((pts[lab == c] - centroids[idx]) ** 2).sum(axis=1)).mean()
            for idx, c in enumerate(uniq)
        ]
    )
    db_terms = []
    for i in range(k):
        ratios = [
            (scatters[i] + scatters[j])
            / np.linalg.norm(centroids[i] - centroids[j])
            for j in range(k)
            if j != i
        ]
        db_terms.append(max(ratios))
    davies_bouldin = float(np.mean(db_terms))

    # Calinski-Harabasz
    overall = pts.mean(axis=0)
    between = float(
        (sizes * ((centroids - overall) ** 2).sum(axis=1)).sum()
    )
    within = float(
        sum(
            ((pts[lab == c] - centroids[idx]) ** 2).sum()
            for idx, c in enumerate(uniq)
        )
    )
    if within == 0.0:
        calinski = np.inf if between > 0 else 0.0
    else:
        calinski = (between / (k - 1)) / (within / (n - k))

    variance = float(
        np.mean(
            [
                ((pts[lab == c] - centroids[idx]) ** 2).sum(axis=1).mean()
                for idx, c in enumerate(uniq)
            ]
        )
    )
    return ClusterScores(
        silhouette=silhouette,
        davies_bouldin=davies_bouldin,
        calinski_harabasz=float(calinski),
        variance=variance,
    )


def _contingency(pred, true) -> np.ndarray:
    pred = np.asarray(pred, dtype=int)
    true = np.asarray(true, dtype=int)
    if pred.shape != true.shape or pred.size == 0:
        raise ValueError("label arrays must be non-empty and equal-length")
    p_ids, p_inv = np.unique(pred, return_inverse=True)
    t_ids, t_inv = np.unique(true, return_inverse=True)
    table = np.zeros((len(p_ids), len(t_ids)), dtype=np.int64)
    np.add.at(table, (p_inv, t_inv), 1)
    return table


def accuracy_hungarian(pred_labels, true_labels) -> float:
    """Clustering accuracy under the optimal cluster-to-class assignment
    of the contingency table."""
    table = _contingency(pred_labels, true_labels)
    rows, cols = linear_sum_assignment(-table)
    return float(table[rows, cols].sum() / np.asarray(pred_labels).size)


def _entropy(freq: np.ndarray) -> float:
    p = freq[freq > 0] / freq.sum()
    return float(-(p * np.log(p)).sum())


def nmi(pred_labels, true_labels) -> float:
    """Mutual information normalized by the arithmetic mean of the two
    label entropies; returns 1.0 when both labelings are constant."""
    table = _contingency(pred_labels, true_labels).astype(float)
    n = table.sum()
    h_pred = _entropy(table.sum(axis=1))
    h_true = _entropy(table.sum(axis=0))
    if h_pred == 0.0 and h_true == 0.0:
        return 1.0
    if h_pred == 0.0 or h_true == 0.0:
        return 0.0
    joint = table / n
    outer = np.outer(table.sum(axis=1) / n, table.sum(axis=0) / n)
    mask = joint > 0
    mi = float((joint[mask] * np.log(joint[mask] / outer[mask])).sum())
    return mi / ((h_pred + h_true) / 2.0)


@dataclass
class ClusterPipelineResult:
    assignment: ClusterAssignment
    scores: ClusterScores
    reconstructions: np.ndarray
    stack: LayerStack


def chem_cluster_pipeline(
    spectrograms: list[Spectrogram],
    ranks: list[int],
    nmf_config: AlphaNmfConfig,
    chem_config: ChemInitConfig | None,
    k: int,
    true_labels=None,
    kmeans_seed: int = 0,
) -> ClusterPipelineResult:
    """Cluster spectrograms through the factorization cascade.

    Each spectrogram is flattened to one column of Y; the cascade's
    final activation columns are the sample representations fed to
    k-means. Reconstructions are total_basis @ final_X, one column per
    input. When true labels are given, accuracy and NMI are included.
    """
    if len(spectrograms) == 0:
        raise ValueError("need at least one spectrogram")
    shapes = {s.magnitudes.shape for s in spectrograms}
    if len(shapes) != 1:
        raise ValueError(f"spectrograms must share one shape, got {shapes}")
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    Y = np.stack([s.magnitudes.ravel() for s in spectrograms], axis=1)
    stack = multilayer_factorize(Y, ranks, nmf_config, chem_config)
    assignment = kmeans(stack.final_X.T, k, seed=kmeans_seed)
    scores = internal_scores(stack.final_X.T, assignment.labels)
    if true_labels is not None:
        scores.acc = accuracy_hungarian(assignment.labels, true_labels)
        scores.nmi = nmi(assignment.labels, true_labels)
    return ClusterPipelineResult(
        assignment=assignment,
        scores=scores,
        reconstructions=stack.reconstruction(),
        stack=stack,
    )
