"""End-to-end composition: densities -> dissimilarities -> geodesics ->
embedding, plus the cross-validated classification harness."""

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .classify import kernel_nearest_mean_classify, knn_classify
from .datasets import GaussianParams, load_collection, load_term_counts
from .density import fit_kde, term_frequency_pdf
from .divergence import build_dissimilarity_matrix, feature_vectors
from .embedding import (
    METHODS,
    LemParams,
    ccdr,
    classical_mds,
    laplacian_eigenmaps,
    pca_embed,
)
from .errors import (
    FormatError,
    InvalidParameterError,
    MetricMismatchError,
    MissingLabelError,
    StratificationError,
)
from .geodesic import build_neighbor_graph, default_k, ensure_connected, geodesic_distances

PDF_KINDS = ("kde", "multinomial", "gaussian_params")
DEFAULT_METRIC = {"kde": "fisher_kl", "multinomial": "hellinger",
                  "gaussian_params": "fisher_exact_gaussian"}
ALLOWED_METRICS = {
    "kde": ("fisher_kl", "euclidean_l2"),
    "multinomial": ("hellinger", "cosine", "euclidean_l2"),
    "gaussian_params": ("fisher_exact_gaussian", "fisher_kl", "euclidean_l2"),
}
DOC_LABELS_FILE = "doc_labels.csv"


@dataclass
class PipelineConfig:
    input: Optional[str] = None
    labels: Optional[str] = None
    pdf_kind: str = "kde"
    metric: Optional[str] = None
    geodesic: bool = False
    graph_k: Optional[int] = None
    embed: str = "cmds"
    dim: int = 2
    heat_t: Optional[float] = None
    beta: list = field(default_factory=lambda: [0.0])
    knn_k: int = 5
    seed: int = 0
    out: Optional[str] = None
    max_negative_mass: Optional[float] = None
    train_frac: float = 0.5
    folds: int = 20
    classifier: str = "knn"
    diffusion_t: list = field(default_factory=lambda: [1.0])
    dim_sweep: Optional[list] = None

    def resolve(self):
        """Fill defaults that depend on other fields and validate the result."""
        if self.pdf_kind not in PDF_KINDS:
            raise InvalidParameterError(f"unknown pdf kind {self.pdf_kind!r}")
        if self.metric is None:
            self.metric = DEFAULT_METRIC[self.pdf_kind]
        if self.metric not in ALLOWED_METRICS[self.pdf_kind]:
            raise MetricMismatchError(
                f"metric {self.metric!r} is not compatible with pdf kind {self.pdf_kind!r}")
        if self.embed not in METHODS:
            raise InvalidParameterError(f"unknown embedding method {self.embed!r}")
        if self.dim < 1:
            raise InvalidParameterError("embedding dimension must be >= 1")
        if isinstance(self.beta, (int, float)):
            self.beta = [float(self.beta)]
        if isinstance(self.diffusion_t, (int, float)):
            self.diffusion_t = [float(self.diffusion_t)]
        if self.heat_t is not None:
            self.heat_t = float(self.heat_t)
        return self

    def public(self):
        """Config as written to run.json (the output directory is omitted so
        that runs into different directories produce identical records)."""
        d = asdict(self)
        d.pop("out")
        if d["heat_t"] is not None and math.isinf(d["heat_t"]):
            d["heat_t"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidParameterError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if d.get("heat_t") == "inf":
            d["heat_t"] = math.inf
        return cls(**d)


@dataclass
class Inputs:
    ids: list
    labels: list
    pdfs: list
    diagnostics: dict


def load_inputs(cfg):
    """Read the input file and fit one density per set or document."""
    path = Path(cfg.input)
    if cfg.pdf_kind == "multinomial":
        labels_path = cfg.labels
        if labels_path is None and (path.parent / DOC_LABELS_FILE).exists():
            labels_path = path.parent / DOC_LABELS_FILE
        docs = load_term_counts(path, labels_path)
        return Inputs([d.id for d in docs], [d.label for d in docs],
                      [term_frequency_pdf(d.counts) for d in docs], {})
    coll = load_collection(path)
    ids, labels = coll.ids, coll.labels
    if cfg.pdf_kind == "gaussian_params":
        pdfs = []
        for s in coll:
            if s.points.shape != (1, 2):
                raise FormatError(f"set {s.id!r}: gaussian_params needs one row (mu, sigma)")
            pdfs.append(GaussianParams(float(s.points[0, 0]), float(s.points[0, 1])))
        return Inputs(ids, labels, pdfs, {})
    pdfs = [fit_kde(s) for s in coll]
    degenerate = sum(int(p.degenerate.any()) for p in pdfs)
    return Inputs(ids, labels, pdfs, {"degenerate_bandwidth_sets": degenerate})


def compute_distances(cfg, inputs, parallel=True):
    return build_dissimilarity_matrix(inputs.pdfs, cfg.metric, parallel=parallel, ids=inputs.ids)


def graph_k(cfg, n):
    k = cfg.graph_k if cfg.graph_k is not None else default_k(n)
    return min(k, n - 1)


def compute_geodesic(cfg, D, parallel=True):
    """Geodesic matrix over the bridged kNN graph, and the graph itself."""
    graph = ensure_connected(build_neighbor_graph(D, graph_k(cfg, D.n)), D)
    return geodesic_distances(graph, parallel=parallel), graph


def lem_graph(cfg, M):
    return ensure_connected(build_neighbor_graph(M, graph_k(cfg, M.n)), M)


def compute_embedding(cfg, M, labels, pdfs=None, beta=None, dim=None, graph=None):
    """Embed the matrix ``M`` (distances or geodesics) per ``cfg.embed``."""
    d = dim or cfg.dim
    if cfg.embed == "cmds":
        return classical_mds(M, d)
    if cfg.embed == "pca":
        if pdfs is None:
            raise InvalidParameterError("pca needs the fitted densities")
        return pca_embed(feature_vectors(pdfs), d, ids=M.ids)
    b = cfg.beta[0] if beta is None else beta
    params = LemParams(k_neighbors=graph_k(cfg, M.n), heat_t=cfg.heat_t, label_weight_beta=b)
    graph = graph if graph is not None else lem_graph(cfg, M)
    if cfg.embed == "lem":
        return laplacian_eigenmaps(M, d, params, graph=graph)
    return ccdr(M, labels, d, params, graph=graph)


# ---------------------------------------------------------------------------
# classification harness


def fold_seeds(seed, folds):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(folds)]


def stratified_split(labels, train_frac, rng):
    """Per class, shuffle members and send round(frac * n_c) of them to training."""
    if not 0 < train_frac < 1:
        raise InvalidParameterError("train_frac must lie in (0, 1)")
    labels = np.asarray(labels)
    train = []
    for c in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == c)
        n_tr = int(math.floor(train_frac * members.size + 0.5))
        if n_tr == 0:
            raise StratificationError(f"class {c} has no training samples")
        train.extend(rng.permutation(members)[:n_tr].tolist())
    train = np.array(sorted(train), dtype=int)
    test = np.setdiff1d(np.arange(labels.size), train)
    if test.size == 0:
        raise StratificationError("split leaves no test samples")
    return train, test


def _summary(accs):
    a = np.asarray(accs, dtype=float)
    return {
        "mean": float(a.mean()),
        "std": float(a.std(ddof=1)) if a.size > 1 else 0.0,
        "per_fold": [float(x) for x in a],
    }


def evaluate_classification(cfg, inputs, M=None):
    """Repeated stratified train/test evaluation.

    Each fold draws its own split, embeds all points jointly with the test
    labels withheld, classifies the test points, and records accuracy.
    Returns the metrics record written to metrics.json.
    """
    labels = inputs.labels
    if any(x is None for x in labels):
        raise MissingLabelError("classification needs a label for every set")
    labels = np.asarray(labels)
    seeds = fold_seeds(cfg.seed, cfg.folds)
    splits = [stratified_split(labels, cfg.train_frac, np.random.default_rng(s)) for s in seeds]
    results = []
    if cfg.classifier == "kernel_nearest_mean":
        if cfg.pdf_kind != "multinomial":
            raise MetricMismatchError("kernel_nearest_mean needs multinomial densities")
        pdfs = inputs.pdfs
        for t in cfg.diffusion_t:
            accs = []
            for tr, te in splits:
                pred = kernel_nearest_mean_classify([pdfs[i] for i in tr], labels[tr],
                                                    [pdfs[i] for i in te], t)
                accs.append(float(np.mean(pred == labels[te])))
            results.append({"diffusion_t": float(t), **_summary(accs)})
    elif cfg.classifier == "knn":
        dims = sorted(set(cfg.dim_sweep or [cfg.dim]))
        dmax = dims[-1]
        graph = lem_graph(cfg, M) if cfg.embed in ("lem", "ccdr") else None
        betas = cfg.beta if cfg.embed == "ccdr" else [0.0]
        shared = None
        for b in betas:
            per_dim = {d: [] for d in dims}
            for tr, te in splits:
                if cfg.embed != "ccdr" or b == 0:
                    # label-free embedding: identical for every fold
                    if shared is None:
                        shared = compute_embedding(cfg, M, None, inputs.pdfs, 0.0, dmax, graph)
                    emb = shared
                else:
                    known = [None] * labels.size
                    for i in tr:
                        known[i] = int(labels[i])
                    emb = compute_embedding(cfg, M, known, inputs.pdfs, b, dmax, graph)
                for d in dims:
                    X = emb.coords[:, :d]
                    pred = knn_classify(X[tr], labels[tr], X[te], min(cfg.knn_k, tr.size))
                    per_dim[d].append(float(np.mean(pred == labels[te])))
            for d in dims:
                results.append({"beta": float(b), "dim": d, **_summary(per_dim[d])})
    else:
        raise InvalidParameterError(f"unknown classifier {cfg.classifier!r}")
    best = max(results, key=lambda r: r["mean"])
    return {
        "classifier": cfg.classifier,
        "embed": cfg.embed,
        "metric": cfg.metric,
        "folds": cfg.folds,
        "train_frac": cfg.train_frac,
        "seed": cfg.seed,
        "fold_seeds": seeds,
        "results": results,
        "best": best,
    }
