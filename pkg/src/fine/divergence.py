"""Dissimilarities between densities and assembly of pairwise matrices.

Covers the plug-in KL estimate between KDEs and its symmetrisation, the
closed forms for univariate normals (KL and Fisher information distance),
and the Hellinger, cosine and alpha divergences between multinomials.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._util import fmt, ordered_map, readonly
from .datasets import GaussianParams
from .density import KernelDensityEstimate, MultinomialPdf
from .errors import (
    DimensionError,
    FormatError,
    InvalidParameterError,
    MetricMismatchError,
    SupportError,
)

METRICS = ("fisher_kl", "hellinger", "cosine", "euclidean_l2", "fisher_exact_gaussian")


@dataclass(frozen=True, eq=False)
class DissimilarityMatrix:
    values: np.ndarray
    metric: str
    ids: tuple
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DimensionError("dissimilarity matrix must be square")
        if len(self.ids) != v.shape[0]:
            raise DimensionError("ids do not match matrix size")
        if self.metric not in METRICS:
            raise InvalidParameterError(f"unknown metric {self.metric!r}")
        if v.flags.writeable:
            v = readonly(v)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def n(self):
        return self.values.shape[0]

    def check(self, atol=1e-12):
        """Raise if the matrix is not symmetric, zero-diagonal, finite and >= 0."""
        v = self.values
        if not np.all(np.isfinite(v)):
            raise FormatError("non-finite dissimilarity")
        if np.any(v < 0):
            raise FormatError("negative dissimilarity")
        if np.any(np.diag(v) != 0):
            raise FormatError("non-zero diagonal")
        if np.max(np.abs(v - v.T), initial=0.0) > atol:
            raise FormatError("matrix is not symmetric")

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.ids)
            for row in self.values:
                w.writerow([fmt(x) for x in row])

    @classmethod
    def from_csv(cls, path, metric):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if not rows:
            raise FormatError(f"{path}: empty matrix file")
        ids = rows[0]
        if len(rows) - 1 != len(ids) or any(len(r) != len(ids) for r in rows[1:]):
            raise FormatError(f"{path}: matrix is not {len(ids)} x {len(ids)}")
        return cls(np.array([[float(x) for x in r] for r in rows[1:]]), metric, tuple(ids))


# ---------------------------------------------------------------------------
# KDE divergences


def _check_dims(p, q):
    if p.dim != q.dim:
        raise DimensionError(f"dimension mismatch: {p.dim} vs {q.dim}")


def kl_empirical_raw(p, q, log_p=None):
    """Unclamped plug-in estimate of KL(p || q).

    Uses p's own samples as the Monte-Carlo sample:
    (1/n_p) sum_x [log p(x) - log q(x)]. Can be slightly negative.
    """
    _check_dims(p, q)
    if log_p is None:
        log_p = p.log_pdf(p.samples)
    return float(np.mean(log_p - q.log_pdf(p.samples)))


def kl_empirical(p, q):
    """Plug-in KL(p || q) between two KDEs, clamped at zero."""
    return max(0.0, kl_empirical_raw(p, q))


def kl_gaussian_closed(a, b):
    """KL(a || b) for univariate normals."""
    va, vb = a.sigma ** 2, b.sigma ** 2
    return 0.5 * (math.log(vb / va) + va / vb + (b.mu - a.mu) ** 2 / vb - 1.0)


def kl_symmetric(p, q):
    """KL(p||q) + KL(q||p); closed form when both arguments are GaussianParams."""
    if isinstance(p, GaussianParams) and isinstance(q, GaussianParams):
        return kl_gaussian_closed(p, q) + kl_gaussian_closed(q, p)
    return kl_empirical(p, q) + kl_empirical(q, p)


def fisher_approx_from_kl(p, q):
    """Local Fisher-distance approximation: square root of the symmetric KL."""
    return math.sqrt(kl_symmetric(p, q))


def fisher_gaussian_closed(a, b):
    """Exact Fisher information distance between univariate normals.

    With u = (mu_a/sqrt2, sigma_a), v = (mu_b/sqrt2, sigma_b) and v' the
    reflection of v through the mean axis, the distance is
    sqrt2 * log((|u-v'| + |u-v|) / (|u-v'| - |u-v|)). Evaluated as
    sqrt2 * log1p(2|u-v| / (|u-v'| - |u-v|)), which avoids cancellation for
    nearby points.
    """
    if a == b:
        return 0.0
    dm = (a.mu - b.mu) / math.sqrt(2.0)
    near = math.hypot(dm, a.sigma - b.sigma)
    far = math.hypot(dm, a.sigma + b.sigma)
    if near == 0.0:
        return 0.0
    return math.sqrt(2.0) * math.log1p(2.0 * near / (far - near))


# ---------------------------------------------------------------------------
# multinomial divergences


def _probs(p):
    return p.probs if isinstance(p, MultinomialPdf) else np.asarray(p, dtype=float)


def _pair(p, q):
    p, q = _probs(p), _probs(q)
    if p.shape != q.shape:
        raise DimensionError(f"dictionary size mismatch: {p.shape} vs {q.shape}")
    return p, q


def bhattacharyya_coefficient(p, q):
    p, q = _pair(p, q)
    return float(np.sum(np.sqrt(p * q)))


def hellinger_multinomial(p, q):
    """sqrt(sum (sqrt p - sqrt q)^2); ranges over [0, sqrt 2]."""
    p, q = _pair(p, q)
    d = np.sqrt(p) - np.sqrt(q)
    return float(math.sqrt(np.dot(d, d)))


def cosine_multinomial(p, q):
    """Great-circle distance 2 arccos(sum sqrt(p q)); ranges over [0, pi]."""
    bc = bhattacharyya_coefficient(p, q)
    return 2.0 * math.acos(min(1.0, max(-1.0, bc)))


def alpha_divergence_multinomial(p, q, alpha):
    """Amari alpha-divergence D^(alpha)(p || q).

    alpha = -1 gives KL(p||q), alpha = +1 gives KL(q||p), alpha = 0 gives
    2 sum (sqrt p - sqrt q)^2. Terms where either probability is zero are
    dropped unless the term would be infinite, which raises SupportError.
    """
    p, q = _pair(p, q)
    if alpha == -1 or alpha == 1:
        a, b = (p, q) if alpha == -1 else (q, p)
        live = a > 0
        if np.any(live & (b <= 0)):
            raise SupportError("KL term with zero reference probability")
        return max(0.0, float(np.sum(a[live] * np.log(a[live] / b[live]))))
    ep, eq = (1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0
    if (ep < 0 and np.any((p == 0) & (q > 0))) or (eq < 0 and np.any((q == 0) & (p > 0))):
        raise SupportError("alpha-divergence term is infinite on the given supports")
    both = (p > 0) & (q > 0)
    s = float(np.sum(p[both] ** ep * q[both] ** eq))
    return max(0.0, 4.0 / (1.0 - alpha * alpha) * (1.0 - s))


# ---------------------------------------------------------------------------
# matrix assembly

_KIND_METRICS = {
    "kde": ("fisher_kl", "euclidean_l2"),
    "multinomial": ("hellinger", "cosine", "euclidean_l2"),
    "gaussian": ("fisher_kl", "fisher_exact_gaussian", "euclidean_l2"),
}


def pdf_kind(pdfs):
    kinds = set()
    for p in pdfs:
        if isinstance(p, KernelDensityEstimate):
            kinds.add("kde")
        elif isinstance(p, MultinomialPdf):
            kinds.add("multinomial")
        elif isinstance(p, GaussianParams):
            kinds.add("gaussian")
        else:
            raise MetricMismatchError(f"unsupported density type {type(p).__name__}")
    if len(kinds) != 1:
        raise MetricMismatchError(f"mixed density kinds: {sorted(kinds)}")
    return kinds.pop()


def feature_vectors(pdfs):
    """Euclidean stand-ins: KDE sample means, multinomial probabilities, (mu, sigma)."""
    kind = pdf_kind(pdfs)
    if kind == "kde":
        return np.array([p.samples.mean(axis=0) for p in pdfs])
    if kind == "multinomial":
        return np.array([p.probs for p in pdfs])
    return np.array([[p.mu, p.sigma] for p in pdfs])


def build_dissimilarity_matrix(pdfs, metric, parallel=False, ids=None):
    """Pairwise dissimilarities over a list of fitted densities.

    Only the upper triangle is evaluated; each entry is a pure function of
    its pair, so the result is bit-identical with or without ``parallel``.
    For ``fisher_kl`` the entry is sqrt(KL(i||j) + KL(j||i)) and
    ``diagnostics["clamped_kl"]`` counts directional plug-in estimates that
    came out negative and were clamped to zero.
    """
    pdfs = list(pdfs)
    n = len(pdfs)
    if n == 0:
        raise InvalidParameterError("no densities given")
    ids = tuple(ids) if ids is not None else tuple(str(i) for i in range(n))
    if metric not in METRICS:
        raise InvalidParameterError(f"unknown metric {metric!r}")
    kind = pdf_kind(pdfs)
    if metric not in _KIND_METRICS[kind]:
        raise MetricMismatchError(f"metric {metric!r} does not apply to {kind} densities")
    if kind in ("kde", "multinomial"):
        dims = {p.dim if kind == "kde" else p.dict_size for p in pdfs}
        if len(dims) != 1:
            raise DimensionError(f"densities disagree on dimension: {sorted(dims)}")

    diagnostics = {}
    if metric == "fisher_kl" and kind == "kde":
        self_log = ordered_map(lambda p: p.log_pdf(p.samples), pdfs, parallel)

        def row(i):
            p = pdfs[i]
            return [0.0 if j == i else kl_empirical_raw(p, pdfs[j], self_log[i])
                    for j in range(n)]

        raw = np.array(ordered_map(row, range(n), parallel)).reshape(n, n)
        np.fill_diagonal(raw, 0.0)
        diagnostics["clamped_kl"] = int(np.sum(raw < 0))
        kl = np.maximum(raw, 0.0)
        entry = lambda i, j: math.sqrt(kl[i, j] + kl[j, i])
    elif metric == "fisher_kl":
        entry = lambda i, j: fisher_approx_from_kl(pdfs[i], pdfs[j])
    elif metric == "fisher_exact_gaussian":
        entry = lambda i, j: fisher_gaussian_closed(pdfs[i], pdfs[j])
    elif metric == "hellinger":
        entry = lambda i, j: hellinger_multinomial(pdfs[i], pdfs[j])
    elif metric == "cosine":
        entry = lambda i, j: cosine_multinomial(pdfs[i], pdfs[j])
    else:
        feats = feature_vectors(pdfs)
        entry = lambda i, j: float(np.sqrt(np.sum((feats[i] - feats[j]) ** 2)))

    def upper(i):
        return [entry(i, j) for j in range(i + 1, n)]

    rows = ordered_map(upper, range(n), parallel)
    values = np.zeros((n, n))
    for i, r in enumerate(rows):
        values[i, i + 1:] = r
        values[i + 1:, i] = r
    return DissimilarityMatrix(values, metric, ids, diagnostics)
