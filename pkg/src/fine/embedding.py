"""Spectral embeddings of dissimilarity matrices: classical MDS, Laplacian
eigenmaps, classification-constrained LEM (CCDR), and a PCA baseline."""

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._util import fmt, readonly
from .divergence import DissimilarityMatrix
from .errors import (
    DisconnectedGraphError,
    InsufficientSpectrumError,
    InvalidParameterError,
)
from .geodesic import build_neighbor_graph, default_k
from .linalg import canonical_signs, jacobi_eigh

METHODS = ("cmds", "lem", "ccdr", "pca")

# LEM eigenvalues below this belong to the constant (null) eigenvector.
NULL_EIGENVALUE = 1e-9
# cMDS eigenvalues at or below this fraction of the largest |eigenvalue| count as zero.
POSITIVE_REL = 1e-10


@dataclass(frozen=True, eq=False)
class Embedding:
    coords: np.ndarray
    spectrum: np.ndarray
    method: str
    params: dict = field(default_factory=dict)
    ids: tuple = ()
    labels: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.coords.shape[1]

    def to_csv(self, path):
        labels = self.labels or (None,) * len(self.ids)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["set_id", "label"] + [f"y{k + 1}" for k in range(self.dim)])
            for i, lab, row in zip(self.ids, labels, self.coords):
                w.writerow([i, "" if lab is None else lab] + [fmt(x) for x in row])

    def sidecar(self):
        return {
            "method": self.method,
            "dim": int(self.dim),
            "spectrum": [float(x) for x in self.spectrum],
            "params": _jsonable(self.params),
            "diagnostics": _jsonable(self.diagnostics),
        }

    def write_sidecar(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def load_embedding_csv(path):
    """Read ``set_id,label,y1..yd`` back into (ids, labels, coords)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    ids = [r[0] for r in rows[1:]]
    labels = [int(r[1]) if r[1] != "" else None for r in rows[1:]]
    coords = np.array([[float(x) for x in r[2:]] for r in rows[1:]])
    return ids, labels, coords


@dataclass(frozen=True)
class LemParams:
    """k_neighbors=None uses max(3, ceil(log2 N)); heat_t=None uses the mean
    squared edge dissimilarity, math.inf gives unit weights."""

    k_neighbors: Optional[int] = None
    heat_t: Optional[float] = None
    label_weight_beta: float = 0.0

    def __post_init__(self):
        if self.k_neighbors is not None and self.k_neighbors < 1:
            raise InvalidParameterError("k_neighbors must be >= 1")
        if self.heat_t is not None and not self.heat_t > 0:
            raise InvalidParameterError("heat_t must be positive")
        if not self.label_weight_beta >= 0:
            raise InvalidParameterError("label_weight_beta must be non-negative")


def _matrix(D):
    if isinstance(D, DissimilarityMatrix):
        return D.values, D.ids
    v = np.asarray(D, dtype=float)
    return v, tuple(str(i) for i in range(v.shape[0]))


def classical_mds(D, d):
    """Classical (Torgerson) MDS.

    B = -1/2 H D^2 H is built by subtracting row and column means of the
    squared dissimilarities and adding back the grand mean. Coordinates use
    the d largest eigenvalues; axes whose eigenvalue is not positive are
    zero-filled with a warning. ``diagnostics["negative_eigen_mass"]`` is
    sum|lambda_neg| / sum|lambda|, a measure of how far D is from Euclidean.
    """
    v, ids = _matrix(D)
    n = v.shape[0]
    if not 1 <= d <= n:
        raise InvalidParameterError(f"embedding dimension {d} outside [1, {n}]")
    sq = v * v
    row = sq.mean(axis=1)
    col = sq.mean(axis=0)
    B = -0.5 * (sq - row[:, None] - col[None, :] + sq.mean())
    B = 0.5 * (B + B.T)
    w, V = jacobi_eigh(B)
    w, V = w[::-1], V[:, ::-1]
    scale = np.max(np.abs(w), initial=0.0)
    n_pos = int(np.sum(w > POSITIVE_REL * scale)) if scale > 0 else 0
    use = min(d, n_pos)
    if use < d:
        warnings.warn(f"only {n_pos} positive eigenvalues; padding {d - use} axes with zeros",
                      RuntimeWarning, stacklevel=2)
    coords = np.zeros((n, d))
    if use:
        coords[:, :use] = canonical_signs(V[:, :use]) * np.sqrt(w[:use])
    total = float(np.sum(np.abs(w)))
    neg = float(np.sum(np.abs(w[w < 0])))
    diagnostics = {
        "negative_eigen_mass": neg / total if total > 0 else 0.0,
        "positive_eigenvalues": n_pos,
    }
    return Embedding(readonly(coords), readonly(w[:d]), "cmds", {"dim": d}, ids, (), diagnostics)


def _heat_weights(graph, heat_t, n):
    W = np.zeros((n, n))
    if heat_t is None:
        sq = [w * w for _, _, w in graph.edges]
        heat_t = float(np.mean(sq)) if sq else math.inf
        if not heat_t > 0:
            heat_t = math.inf
    for i, j, w in graph.edges:
        W[i, j] = W[j, i] = 1.0 if math.isinf(heat_t) else math.exp(-w * w / heat_t)
    return W, heat_t


def _spectral(D, d, params, labels, graph, method):
    v, ids = _matrix(D)
    n = v.shape[0]
    params = params or LemParams()
    if d < 1:
        raise InvalidParameterError("embedding dimension must be >= 1")
    if graph is None:
        k = params.k_neighbors or default_k(n)
        graph = build_neighbor_graph(D, k)
    if not graph.connected:
        raise DisconnectedGraphError("LEM adjacency graph is not connected; bridge it first")
    W, heat_t = _heat_weights(graph, params.heat_t, n)
    beta = params.label_weight_beta
    augmented = 0
    if beta > 0 and labels is not None:
        lab = np.array([-1 if x is None else int(x) for x in labels])
        known = lab >= 0
        same = known[:, None] & known[None, :] & (lab[:, None] == lab[None, :])
        np.fill_diagonal(same, False)
        augmented = int(same.sum()) // 2
        if augmented:
            W = W + beta * same
    deg = W.sum(axis=0)
    if np.any(deg <= 0):
        raise DisconnectedGraphError("a node has zero total weight under the heat kernel")
    L = np.diag(deg) - W
    s = 1.0 / np.sqrt(deg)
    M = s[:, None] * L * s[None, :]
    M = 0.5 * (M + M.T)
    w, G = jacobi_eigh(M)
    keep = np.flatnonzero(w >= NULL_EIGENVALUE)
    if keep.size < d:
        raise InsufficientSpectrumError(
            f"requested {d} dimensions but only {keep.size} non-null eigenvectors exist")
    sel = keep[:d]
    f = canonical_signs(s[:, None] * G[:, sel])
    record = {
        "dim": d,
        "k_neighbors": graph.k,
        "heat_t": heat_t,
        "label_weight_beta": beta,
    }
    diagnostics = {
        "discarded_null": int(w.size - keep.size),
        "bridged_edges": graph.added_edges,
        "augmented_pairs": augmented,
    }
    labs = tuple(labels) if labels is not None else ()
    return Embedding(readonly(f), readonly(w[sel]), method, record, ids, labs, diagnostics)


def laplacian_eigenmaps(D, d, params=None, graph=None):
    """Laplacian eigenmaps on a dissimilarity matrix.

    Heat-kernel weights W_ij = exp(-D_ij^2 / t) on the edges of the
    symmetric-union kNN graph (or of ``graph`` when given, e.g. after
    bridging). The generalised problem L f = lambda Deg f is solved through
    Deg^-1/2 L Deg^-1/2 g = lambda g with f = Deg^-1/2 g; the null
    eigenvector is dropped and the next ``d`` are returned.
    """
    return _spectral(D, d, params, None, graph, "lem")


def ccdr(D, labels, d, params=None, graph=None):
    """Classification-constrained LEM.

    Same as :func:`laplacian_eigenmaps` with W'_ij = W_ij + beta for every
    pair of distinct points carrying the same known label. ``None`` labels
    (held-out points) get no extra weight, so train and test points are
    embedded jointly. This additive form is our reading of the method; with
    beta = 0 the result equals plain LEM.
    """
    return _spectral(D, d, params, labels, graph, "ccdr")


def pca_embed(vectors, d, ids=None):
    """Project centred rows onto the top ``d`` principal axes.

    Works on whichever of the covariance (M x M) or Gram (N x N) matrix is
    smaller. Axes are sign-fixed so their first non-negligible entry is
    positive; ``diagnostics["components"]`` holds them as rows.
    """
    X = np.asarray(vectors, dtype=float)
    n, m = X.shape
    if not 1 <= d <= min(n, m):
        raise InvalidParameterError(f"embedding dimension {d} outside [1, {min(n, m)}]")
    Xc = X - X.mean(axis=0)
    denom = max(n - 1, 1)
    if m <= n:
        w, V = jacobi_eigh(Xc.T @ Xc / denom)
        w, V = w[::-1], V[:, ::-1]
    else:
        w, U = jacobi_eigh(Xc @ Xc.T)
        w, U = w[::-1], U[:, ::-1]
        pos = w > 0
        V = np.zeros((m, w.size))
        V[:, pos] = (Xc.T @ U[:, pos]) / np.sqrt(w[pos])
        w = w / denom
    scale = np.max(np.abs(w), initial=0.0)
    n_pos = int(np.sum(w > POSITIVE_REL * scale)) if scale > 0 else 0
    use = min(d, n_pos)
    if use < d:
        warnings.warn(f"data has rank {n_pos}; padding {d - use} axes with zeros",
                      RuntimeWarning, stacklevel=2)
    comps = np.zeros((m, d))
    comps[:, :use] = canonical_signs(V[:, :use])
    coords = Xc @ comps
    spectrum = np.where(np.arange(d) < use, w[:d], 0.0)
    trace = float(np.trace(Xc.T @ Xc)) / denom if m <= n else float(np.sum(Xc * Xc)) / denom
    diagnostics = {
        "components": comps.T,
        "explained_variance_ratio": spectrum / trace if trace > 0 else np.zeros(d),
    }
    ids = tuple(ids) if ids is not None else tuple(str(i) for i in range(n))
    return Embedding(readonly(coords), readonly(spectrum), "pca", {"dim": d}, ids, (), diagnostics)


def with_labels(emb, labels):
    """Copy of ``emb`` carrying per-row labels for output."""
    return Embedding(emb.coords, emb.spectrum, emb.method, emb.params, emb.ids,
                     tuple(labels), emb.diagnostics)
