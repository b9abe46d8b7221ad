"""Downstream classifiers used to evaluate embeddings: Euclidean k-NN and a
nearest-class-mean rule under the multinomial diffusion kernel."""

import math

import numpy as np
from scipy.special import logsumexp

from .divergence import bhattacharyya_coefficient
from .errors import InsufficientSamplesError, InvalidParameterError


def knn_classify(train, train_labels, test, k):
    """Majority vote among the k Euclidean nearest training rows.

    Neighbours are ranked by (distance, training index). A tied vote goes
    to the label whose tied neighbours have the smallest mean distance, then
    to the smallest label id.
    """
    train = np.asarray(train, dtype=float)
    test = np.asarray(test, dtype=float)
    labels = np.asarray(train_labels)
    if train.ndim == 1:
        train = train[:, None]
    if test.ndim == 1:
        test = test[:, None]
    if train.shape[0] == 0:
        raise InsufficientSamplesError("empty training set")
    if not 1 <= k <= train.shape[0]:
        raise InvalidParameterError(f"k = {k} outside [1, {train.shape[0]}]")
    idx = np.arange(train.shape[0])
    out = np.empty(test.shape[0], dtype=labels.dtype)
    for t, x in enumerate(test):
        dist = np.sqrt(np.sum((train - x) ** 2, axis=1))
        near = np.lexsort((idx, dist))[:k]
        votes = {}
        for j in near:
            votes.setdefault(labels[j], []).append(dist[j])
        best = max(len(v) for v in votes.values())
        tied = [(float(np.mean(v)), lab) for lab, v in votes.items() if len(v) == best]
        out[t] = min(tied)[1]
    return out


def log_diffusion_kernel_multinomial(p, q, t, n_dims, negative_exponent=False):
    """log K for the multinomial diffusion kernel.

    K = (4 pi t)^(+-n/2) exp(-arccos^2(sqrt p . sqrt q) / t). The prefactor
    exponent is +n/2 by default; ``negative_exponent`` selects -n/2.
    """
    if not t > 0:
        raise InvalidParameterError("diffusion time t must be positive")
    bc = min(1.0, max(-1.0, bhattacharyya_coefficient(p, q)))
    sign = -1.0 if negative_exponent else 1.0
    return sign * 0.5 * n_dims * math.log(4.0 * math.pi * t) - math.acos(bc) ** 2 / t


def diffusion_kernel_multinomial(p, q, t, n_dims, negative_exponent=False):
    """Multinomial diffusion kernel value. Overflows to inf for large n_dims
    with t > 1/(4 pi); use the log form in that regime."""
    return math.exp(log_diffusion_kernel_multinomial(p, q, t, n_dims, negative_exponent))


def kernel_nearest_mean_classify(train, train_labels, test, t, n_dims=None,
                                 negative_exponent=False):
    """Assign each test PDF to the class with the largest mean kernel value.

    Computed in the log domain (log-mean-exp), so the constant prefactor never
    overflows. Ties go to the smallest label id.
    """
    labels = np.asarray(train_labels)
    if len(train) == 0:
        raise InsufficientSamplesError("empty training set")
    classes = sorted(set(labels.tolist()))
    members = {c: [i for i in range(len(train)) if labels[i] == c] for c in classes}
    out = []
    for x in test:
        n = n_dims if n_dims is not None else len(getattr(x, "probs", x))
        lk = np.array([log_diffusion_kernel_multinomial(x, train[i], t, n, negative_exponent)
                       for i in range(len(train))])
        scores = [(-(logsumexp(lk[members[c]]) - math.log(len(members[c]))), c) for c in classes]
        out.append(min(scores)[1])
    return np.array(out, dtype=labels.dtype)
