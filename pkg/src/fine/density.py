"""Non-parametric densities: Gaussian kernel density estimates for sample
sets and term-frequency multinomials for count vectors."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._util import readonly
from .datasets import SampleSet
from .errors import (
    DegenerateDocumentError,
    DimensionError,
    InsufficientSamplesError,
    InvalidParameterError,
)

_LOG_2PI = math.log(2.0 * math.pi)

# Upper bound on the number of (point, sample) pairs held in memory at once.
_CHUNK_PAIRS = 1 << 21


def silverman_bandwidth(samples):
    """Silverman's multivariate rule of thumb.

    h_k = s_k * (4 / ((dim + 2) n)) ** (1 / (dim + 4)), with s_k the unbiased
    standard deviation of dimension k.

    Returns
    -------
    h : (dim,) ndarray
    degenerate : (dim,) bool ndarray
        True where s_k was zero and a substitute scale was used (the largest
        s over dimensions, or 1.0 when every dimension is constant).
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, dim = x.shape
    if n < 2:
        raise InsufficientSamplesError("bandwidth rule needs at least 2 samples")
    s = x.std(axis=0, ddof=1)
    if not np.all(np.isfinite(s)):
        raise InvalidParameterError("sample standard deviation is not finite")
    degenerate = s == 0
    if degenerate.any():
        fill = s.max() if s.max() > 0 else 1.0
        s = np.where(degenerate, fill, s)
    factor = (4.0 / ((dim + 2) * n)) ** (1.0 / (dim + 4))
    return s * factor, degenerate


@dataclass(frozen=True, eq=False)
class KernelDensityEstimate:
    """Gaussian KDE with diagonal bandwidths.

    p(x) = 1/n sum_i prod_k N(x_k; s_ik, h_k^2)

    Samples are held in lexicographic row order so that every sum runs in a
    canonical order; the estimate is therefore exactly invariant to the order
    in which samples were supplied.
    """

    samples: np.ndarray
    bandwidths: np.ndarray
    log_norm_const: float
    degenerate: np.ndarray

    @property
    def n(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]

    def log_pdf(self, x):
        """Log-density at each row of ``x`` (shape (m, dim) or (dim,))."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise DimensionError(f"expected points of dimension {self.dim}, got shape {x.shape}")
        s = self.samples / self.bandwidths
        z = x / self.bandwidths
        out = np.empty(x.shape[0])
        step = max(1, _CHUNK_PAIRS // max(1, self.n * self.dim))
        for a in range(0, x.shape[0], step):
            diff = z[a:a + step, None, :] - s[None, :, :]
            q = -0.5 * np.einsum("ijk,ijk->ij", diff, diff)
            out[a:a + step] = logsumexp(q, axis=1)
        out += self.log_norm_const
        return out[0] if single else out

    def pdf(self, x):
        return np.exp(self.log_pdf(x))


def fit_kde(data, bandwidths=None):
    """Fit a Gaussian KDE to a SampleSet (or an n x dim array).

    When ``bandwidths`` is omitted Silverman's rule is applied.
    """
    pts = data.points if isinstance(data, SampleSet) else np.asarray(data, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < 1:
        raise InsufficientSamplesError("empty sample set")
    # canonical order first, so the bandwidth sums are order-free too
    pts = pts[np.lexsort(pts.T[::-1])]
    if bandwidths is None:
        h, degenerate = silverman_bandwidth(pts)
    else:
        h = np.broadcast_to(np.asarray(bandwidths, dtype=float), (pts.shape[1],)).copy()
        if not np.all(h > 0) or not np.all(np.isfinite(h)):
            raise InvalidParameterError("bandwidths must be positive and finite")
        degenerate = np.zeros(pts.shape[1], dtype=bool)
    n, dim = pts.shape
    log_norm = -math.log(n) - 0.5 * dim * _LOG_2PI - float(np.sum(np.log(h)))
    return KernelDensityEstimate(
        samples=readonly(pts),
        bandwidths=readonly(h),
        log_norm_const=log_norm,
        degenerate=readonly(degenerate, dtype=bool),
    )


def kde_log_eval(kde, x):
    """log p(x) for a single point, via log-sum-exp over the samples."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError("kde_log_eval takes a single point; use KernelDensityEstimate.log_pdf")
    if x.shape[0] != kde.dim:
        raise DimensionError(f"point has dimension {x.shape[0]}, KDE has {kde.dim}")
    return float(kde.log_pdf(x))


@dataclass(frozen=True, eq=False)
class MultinomialPdf:
    probs: np.ndarray

    @property
    def dict_size(self):
        return self.probs.shape[0]


def term_frequency_pdf(counts):
    """Maximum-likelihood multinomial of a count vector: x_i / sum(x)."""
    x = np.asarray(counts, dtype=float)
    if x.ndim != 1:
        raise DimensionError("counts must be a vector")
    if np.any(x < 0):
        raise InvalidParameterError("counts must be non-negative")
    total = x.sum()
    if not total > 0:
        raise DegenerateDocumentError("document has zero total count")
    return MultinomialPdf(readonly(x / total))
