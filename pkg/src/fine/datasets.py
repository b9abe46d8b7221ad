"""Sample-set collections: file ingestion, canonical CSV output, and the
synthetic generators used for validation (Gaussian grids, swiss-roll sets,
multinomial document clusters).
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from ._util import encode_labels, fmt, readonly
from .errors import (
    DegenerateDocumentError,
    EmptyInputError,
    FormatError,
    InvalidParameterError,
    ParseError,
)

# Names reserved for sidecar files inside a directory-format collection.
SET_LABELS_FILE = "set_labels.csv"
LABEL_NAMES_FILE = "labels.csv"


@dataclass(frozen=True)
class SampleSet:
    id: str
    points: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise FormatError(f"set {self.id!r}: points must be a non-empty n x dim matrix")
        if not np.all(np.isfinite(pts)):
            raise FormatError(f"set {self.id!r}: non-finite coordinate")
        if not pts.flags.writeable and pts.dtype == float:
            object.__setattr__(self, "points", pts)
        else:
            object.__setattr__(self, "points", readonly(pts))

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class DatasetCollection:
    sets: tuple
    label_names: dict = field(default_factory=dict)

    def __post_init__(self):
        sets = tuple(self.sets)
        if not sets:
            raise EmptyInputError("collection has no sets")
        dims = {s.dim for s in sets}
        if len(dims) != 1:
            raise FormatError(f"sets disagree on dimension: {sorted(dims)}")
        ids = [s.id for s in sets]
        if len(set(ids)) != len(ids):
            raise FormatError("duplicate set ids")
        object.__setattr__(self, "sets", sets)

    @property
    def dim(self):
        return self.sets[0].dim

    @property
    def labels_present(self):
        return all(s.label is not None for s in self.sets)

    @property
    def ids(self):
        return [s.id for s in self.sets]

    @property
    def labels(self):
        return [s.label for s in self.sets]

    def __len__(self):
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    def __getitem__(self, i):
        return self.sets[i]


@dataclass(frozen=True)
class GaussianParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0) or not math.isfinite(self.sigma) or not math.isfinite(self.mu):
            raise InvalidParameterError(f"invalid Gaussian parameters ({self.mu}, {self.sigma})")


@dataclass(frozen=True)
class GaussianGrid:
    params: tuple
    grid_shape: tuple


class Document(NamedTuple):
    id: str
    counts: np.ndarray
    label: Optional[int] = None


# ---------------------------------------------------------------------------
# reading


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    # a trailing blank line is not data
    while rows and not any(c.strip() for c in rows[-1]):
        rows.pop()
    if not rows:
        raise EmptyInputError(f"{path}: empty file")
    return rows


def _floats(cells, row):
    out = []
    for c in cells:
        try:
            v = float(c)
        except ValueError:
            raise ParseError(f"non-numeric coordinate {c!r}", row=row) from None
        if not math.isfinite(v):
            raise ParseError(f"non-finite coordinate {c!r}", row=row)
        out.append(v)
    return out


def _read_long_csv(path):
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    if len(header) < 3 or header[0] != "set_id" or header[1] != "label":
        raise FormatError(f"{path}: header must be set_id,label,x1..xD")
    width = len(header)
    if len(rows) == 1:
        raise EmptyInputError(f"{path}: no data rows")
    points, raw_labels, order = {}, {}, []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise FormatError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
        sid, lab = row[0].strip(), row[1].strip()
        if not sid:
            raise FormatError(f"{path}: row {lineno} has an empty set_id")
        if sid not in points:
            points[sid] = []
            raw_labels[sid] = lab
            order.append(sid)
        elif raw_labels[sid] != lab:
            raise FormatError(f"{path}: set {sid!r} has conflicting labels")
        points[sid].append(_floats(row[2:], lineno))
    ids = sorted(order)
    labels, names = encode_labels([raw_labels[i] for i in ids])
    sets = [SampleSet(i, np.array(points[i]), lab) for i, lab in zip(ids, labels)]
    return DatasetCollection(tuple(sets), names)


def _read_directory(path):
    path = Path(path)
    files = sorted(
        p for p in path.iterdir()
        if p.suffix == ".csv" and p.name not in (SET_LABELS_FILE, LABEL_NAMES_FILE)
    )
    if not files:
        raise EmptyInputError(f"{path}: no set files")
    raw_labels = {}
    lab_path = path / SET_LABELS_FILE
    if lab_path.exists():
        raw_labels = read_id_labels(lab_path)
    width = None
    sets = []
    ids = [p.stem for p in files]
    labels, names = encode_labels([raw_labels.get(i, "") for i in ids])
    for p, lab in zip(files, labels):
        rows = _read_rows(p)
        body = rows[1:]
        if not body:
            raise EmptyInputError(f"{p}: no data rows")
        w = len(rows[0])
        if width is None:
            width = w
        elif w != width:
            raise FormatError(f"{p}: {w} columns, expected {width}")
        data = []
        for lineno, row in enumerate(body, start=2):
            if len(row) != w:
                raise FormatError(f"{p}: row {lineno} has {len(row)} columns, expected {w}")
            data.append(_floats(row, lineno))
        sets.append(SampleSet(p.stem, np.array(data), lab))
    return DatasetCollection(tuple(sets), names)


def read_id_labels(path):
    """Read a two-column ``id,label`` file into a dict of raw label strings."""
    rows = _read_rows(path)
    out = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise FormatError(f"{path}: row {lineno} must have 2 columns")
        out[row[0].strip()] = row[1].strip()
    return out


def load_collection(path, format=None):
    """Load a collection from a long CSV file or a directory of per-set CSVs.

    ``format`` is ``"long_csv"`` or ``"directory"``; when omitted it is
    inferred from whether ``path`` is a directory. Sets come back in
    lexicographic id order.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if format is None:
        format = "directory" if path.is_dir() else "long_csv"
    if format == "long_csv":
        coll = _read_long_csv(path)
    elif format == "directory":
        coll = _read_directory(path)
    else:
        raise InvalidParameterError(f"unknown collection format {format!r}")
    names_path = (path if path.is_dir() else path.parent) / LABEL_NAMES_FILE
    if not coll.label_names and names_path.exists() and names_path != path:
        names = {}
        for k, v in read_id_labels(names_path).items():
            try:
                names[int(k)] = v
            except ValueError:
                raise ParseError(f"{names_path}: label id {k!r} is not an integer") from None
        coll = DatasetCollection(coll.sets, names)
    return coll


def load_term_counts(path, labels_path=None, dict_size=None):
    """Read ``doc_id,term_index,count`` triplets into dense count vectors.

    Documents are returned in lexicographic id order. ``dict_size`` defaults
    to one past the largest term index seen. Duplicate (doc, term) rows are
    summed.
    """
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    if header != ["doc_id", "term_index", "count"]:
        raise FormatError(f"{path}: header must be doc_id,term_index,count")
    if len(rows) == 1:
        raise EmptyInputError(f"{path}: no data rows")
    triplets = []
    max_term = -1
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise FormatError(f"{path}: row {lineno} has {len(row)} columns, expected 3")
        try:
            term, count = int(row[1]), int(row[2])
        except ValueError:
            raise ParseError(f"non-integer term index or count in {row!r}", row=lineno) from None
        if count < 0:
            raise FormatError(f"{path}: row {lineno}: negative count {count}")
        if term < 0:
            raise FormatError(f"{path}: row {lineno}: negative term index {term}")
        max_term = max(max_term, term)
        triplets.append((row[0].strip(), term, count))
    if dict_size is None:
        dict_size = max_term + 1
    elif max_term >= dict_size:
        raise FormatError(f"{path}: term index {max_term} outside dictionary of size {dict_size}")
    vectors = {}
    for doc, term, count in triplets:
        vec = vectors.get(doc)
        if vec is None:
            vec = vectors[doc] = np.zeros(dict_size, dtype=np.int64)
        vec[term] += count
    ids = sorted(vectors)
    raw = read_id_labels(labels_path) if labels_path is not None else {}
    labels, _ = encode_labels([raw.get(i, "") for i in ids])
    docs = []
    for i, lab in zip(ids, labels):
        vec = vectors[i]
        if vec.sum() <= 0:
            raise DegenerateDocumentError(f"document {i!r} has zero total count")
        vec.setflags(write=False)
        docs.append(Document(i, vec, lab))
    return docs


def load_term_label_names(labels_path):
    """Label names for a document label file (empty if labels are numeric)."""
    raw = read_id_labels(labels_path)
    return encode_labels(list(raw.values()))[1]


# ---------------------------------------------------------------------------
# writing


def save_collection(collection, path):
    """Write the canonical long CSV. Loading the result reproduces the input
    and re-saving it yields identical bytes."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["set_id", "label"] + [f"x{k + 1}" for k in range(collection.dim)])
        for s in collection.sets:
            lab = "" if s.label is None else str(s.label)
            for row in s.points:
                w.writerow([s.id, lab] + [fmt(v) for v in row])


def save_label_names(names, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "name"])
        for k in sorted(names):
            w.writerow([k, names[k]])


def save_ground_truth(ids, points, path):
    points = np.asarray(points, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["set_id"] + [f"y{k + 1}" for k in range(points.shape[1])])
        for i, row in zip(ids, points):
            w.writerow([i] + [fmt(v) for v in row])


def load_ground_truth(path):
    rows = _read_rows(path)
    ids = [r[0] for r in rows[1:]]
    return ids, np.array([_floats(r[1:], n) for n, r in enumerate(rows[1:], start=2)])


def save_term_counts(docs, path, labels_path=None):
    """Write documents as sparse triplets (non-zero counts only)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["doc_id", "term_index", "count"])
        for d in docs:
            for t in np.flatnonzero(d.counts):
                w.writerow([d.id, int(t), int(d.counts[t])])
    if labels_path is not None:
        with open(labels_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["doc_id", "label"])
            for d in docs:
                w.writerow([d.id, "" if d.label is None else d.label])


# ---------------------------------------------------------------------------
# generators


def gen_gaussian_grid(alpha, beta, k_steps, l_steps):
    """Univariate normals at (mu, sigma) = (alpha*k, 1 + beta*l), k, l from 1.

    Parameters are enumerated row-major: k is the outer index.
    """
    if k_steps < 1 or l_steps < 1:
        raise InvalidParameterError("grid needs at least one step in each direction")
    params = []
    for k in range(1, k_steps + 1):
        for l in range(1, l_steps + 1):
            sigma = 1.0 + beta * l
            if not sigma > 0:
                raise InvalidParameterError(f"sigma = {sigma} at l = {l} is not positive")
            params.append(GaussianParams(alpha * k, sigma))
    return GaussianGrid(tuple(params), (k_steps, l_steps))


def grid_ids(grid):
    k_steps, l_steps = grid.grid_shape
    wk, wl = len(str(k_steps)), len(str(l_steps))
    return [f"k{k:0{wk}d}_l{l:0{wl}d}" for k in range(1, k_steps + 1) for l in range(1, l_steps + 1)]


def gaussian_params_collection(params, ids=None, labels=None):
    """Pack Gaussian parameters as a collection of one-point sets (mu, sigma)."""
    ids = ids or [f"g{i:04d}" for i in range(len(params))]
    labels = labels or [None] * len(params)
    return DatasetCollection(tuple(
        SampleSet(i, np.array([[p.mu, p.sigma]]), lab) for i, p, lab in zip(ids, params, labels)
    ))


def _set_ids(prefix, n):
    width = max(3, len(str(n - 1)))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def swiss_roll_points(t, h):
    """Map roll parameters to R^3: (t cos t, h, t sin t)."""
    t = np.asarray(t, dtype=float)
    h = np.asarray(h, dtype=float)
    return np.column_stack([t * np.cos(t), h, t * np.sin(t)])


SWISS_T_RANGE = (1.5 * np.pi, 4.5 * np.pi)
SWISS_HEIGHT = 20.0


def gen_swiss_roll_sets(n_sets, samples_per_set, noise_scale, seed):
    """Sample sets drawn from N(y_i, noise_scale^2 I) around swiss-roll points.

    Returns ``(collection, ground_truth)`` where row i of ``ground_truth`` is
    the mean y_i of set i.
    """
    if n_sets < 4:
        raise InvalidParameterError("n_sets must be at least 4")
    if samples_per_set < 2:
        raise InvalidParameterError("samples_per_set must be at least 2")
    if not noise_scale >= 0:
        raise InvalidParameterError("noise_scale must be non-negative")
    rng = np.random.default_rng(seed)
    t = rng.uniform(*SWISS_T_RANGE, size=n_sets)
    h = rng.uniform(0.0, SWISS_HEIGHT, size=n_sets)
    y = swiss_roll_points(t, h)
    noise = rng.standard_normal((n_sets, samples_per_set, 3))
    ids = _set_ids("s", n_sets)
    sets = tuple(
        SampleSet(ids[i], y[i] + noise_scale * noise[i]) for i in range(n_sets)
    )
    y.setflags(write=False)
    return DatasetCollection(sets), y


def _class_pdfs(rng, n_classes, dict_size, concentration, block_weight):
    block = dict_size // n_classes
    pdfs = np.empty((n_classes, dict_size))
    for c in range(n_classes):
        shape = np.full(dict_size, float(concentration))
        shape[c * block:(c + 1) * block] += block_weight
        g = rng.gamma(shape)
        pdfs[c] = g / g.sum()
    return pdfs


def multinomial_class_pdfs(n_classes, dict_size, concentration, seed, block_weight=1.0):
    """Class term distributions exactly as drawn by gen_multinomial_clusters."""
    _check_multinomial_args(n_classes, dict_size, 1, 1, concentration, block_weight)
    rng = np.random.default_rng(seed)
    return _class_pdfs(rng, n_classes, dict_size, concentration, block_weight)


def _check_multinomial_args(n_classes, dict_size, docs_per_class, counts_per_doc,
                            concentration, block_weight):
    if min(n_classes, dict_size, docs_per_class, counts_per_doc) < 1:
        raise InvalidParameterError("all counts must be >= 1")
    if dict_size < n_classes:
        raise InvalidParameterError("dict_size must be at least n_classes")
    if not concentration > 0:
        raise InvalidParameterError("concentration must be positive")
    if not block_weight >= 0:
        raise InvalidParameterError("block_weight must be non-negative")


def gen_multinomial_clusters(n_classes, dict_size, docs_per_class, counts_per_doc,
                             concentration, seed, block_weight=1.0):
    """Synthetic labelled corpus of term-count vectors.

    Each class c draws a term distribution from a Dirichlet whose shape is
    ``concentration`` everywhere plus ``block_weight`` on the class's own
    block of ``dict_size // n_classes`` terms. Small concentrations give
    nearly disjoint class supports; large ones push every class towards the
    uniform distribution. Documents draw ``counts_per_doc`` terms from their
    class distribution.
    """
    _check_multinomial_args(n_classes, dict_size, docs_per_class, counts_per_doc,
                            concentration, block_weight)
    rng = np.random.default_rng(seed)
    pdfs = _class_pdfs(rng, n_classes, dict_size, concentration, block_weight)
    ids = _set_ids("d", n_classes * docs_per_class)
    docs = []
    for c in range(n_classes):
        counts = rng.multinomial(counts_per_doc, pdfs[c], size=docs_per_class)
        for row in counts:
            row = row.astype(np.int64)
            row.setflags(write=False)
            docs.append(Document(ids[len(docs)], row, c))
    return docs
