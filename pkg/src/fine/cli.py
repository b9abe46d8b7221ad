"""Command-line driver.

    fine embed --input collection.csv --pdf-kind kde --geodesic --embed cmds --dim 3 --out run/
    fine distances --input terms.csv --pdf-kind multinomial --metric hellinger --out run/
    fine synth swiss-roll --n-sets 200 --seed 1 --out data/
    fine validate-convergence --resolutions 5,10,20 --out report.csv
    fine eval-classify --input terms.csv --pdf-kind multinomial --embed ccdr --beta 0,1,10 --out run/
    fine plot-data --input run/embedding.csv --by-label --out plots/
"""

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._util import fmt
from .datasets import (
    GaussianParams,
    gaussian_params_collection,
    gen_gaussian_grid,
    gen_multinomial_clusters,
    gen_swiss_roll_sets,
    grid_ids,
    save_collection,
    save_ground_truth,
    save_term_counts,
)
from .divergence import (
    DissimilarityMatrix,
    fisher_gaussian_closed,
    kl_gaussian_closed,
)
from .embedding import load_embedding_csv, with_labels
from .errors import FineError, InvalidParameterError, MissingLabelError
from .geodesic import build_neighbor_graph, ensure_connected, shortest_path_lengths
from .pipeline import (
    PipelineConfig,
    compute_distances,
    compute_embedding,
    compute_geodesic,
    evaluate_classification,
    load_inputs,
)

log = logging.getLogger("fine")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_THRESHOLD = 3


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.exc = exc


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, typ, exc, tb):
        if exc is not None and isinstance(exc, (FineError, OSError, ValueError)) \
                and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def _write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands


def _distances(cfg, out):
    with _Stage("load"):
        inputs = load_inputs(cfg)
    with _Stage("distances"):
        D = compute_distances(cfg, inputs)
        D.check()
        D.to_csv(out / "distances.csv")
    return inputs, D


def _run_record(cfg, diagnostics, artifacts):
    return {
        "version": __version__,
        "config": cfg.public(),
        "diagnostics": diagnostics,
        "artifacts": sorted(artifacts),
    }


def cmd_distances(cfg):
    """Stages 1-4: fit densities and write distances.csv."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs, D = _distances(cfg, out)
    diag = {**inputs.diagnostics, **D.diagnostics}
    _write_json(_run_record(cfg, diag, ["distances.csv"]), out / "run.json")
    return EXIT_OK


def cmd_embed(cfg):
    """Full pipeline: densities, dissimilarities, optional geodesics, embedding."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs, D = _distances(cfg, out)
    artifacts = ["distances.csv"]
    diag = {**inputs.diagnostics, **D.diagnostics}
    M = D
    if cfg.geodesic:
        with _Stage("geodesic"):
            M, graph = compute_geodesic(cfg, D)
            M.to_csv(out / "geodesic.csv")
            graph.to_csv(out / "graph.csv")
        artifacts += ["geodesic.csv", "graph.csv"]
        diag["geodesic_bridged_edges"] = graph.added_edges
    with _Stage("embed"):
        emb = compute_embedding(cfg, M, inputs.labels, inputs.pdfs)
        emb = with_labels(emb, inputs.labels)
        emb.to_csv(out / "embedding.csv")
        emb.write_sidecar(out / "spectrum.json")
    artifacts += ["embedding.csv", "spectrum.json"]
    diag.update({f"embed_{k}": v for k, v in emb.sidecar()["diagnostics"].items()
                 if k != "components"})
    status = EXIT_OK
    mass = emb.diagnostics.get("negative_eigen_mass")
    if cfg.max_negative_mass is not None and mass is not None and mass > cfg.max_negative_mass:
        log.error("negative eigenvalue mass %.4g exceeds threshold %.4g", mass, cfg.max_negative_mass)
        status = EXIT_THRESHOLD
    diag["within_thresholds"] = status == EXIT_OK
    _write_json(_run_record(cfg, diag, artifacts + ["run.json"]), out / "run.json")
    return status


def cmd_eval_classify(cfg):
    """Cross-validated classification; writes metrics.json."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with _Stage("load"):
        inputs = load_inputs(cfg)
    M = None
    if cfg.classifier == "knn":
        with _Stage("distances"):
            M = compute_distances(cfg, inputs)
        if cfg.geodesic:
            with _Stage("geodesic"):
                M, _ = compute_geodesic(cfg, M)
    with _Stage("classify"):
        metrics = evaluate_classification(cfg, inputs, M)
    metrics["config"] = cfg.public()
    _write_json(metrics, out / "metrics.json")
    return EXIT_OK


def cmd_synth(kind, params, seed, out):
    """Write a synthetic data set into directory ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "swiss_roll":
        coll, truth = gen_swiss_roll_sets(params.get("n_sets", 200), params.get("samples_per_set", 100),
                                          params.get("noise_scale", 0.5), seed)
        save_collection(coll, out / "collection.csv")
        save_ground_truth(coll.ids, truth, out / "ground_truth.csv")
    elif kind == "gaussian_grid":
        grid = gen_gaussian_grid(params.get("alpha", 0.1), params.get("beta", 0.1),
                                 params.get("k_steps", 10), params.get("l_steps", 10))
        save_collection(gaussian_params_collection(grid.params, grid_ids(grid)),
                        out / "collection.csv")
    elif kind == "multinomial_clusters":
        docs = gen_multinomial_clusters(
            params.get("n_classes", 4), params.get("dict_size", 500),
            params.get("docs_per_class", 100), params.get("counts_per_doc", 200),
            params.get("concentration", 0.05), seed)
        save_term_counts(docs, out / "terms.csv", out / "doc_labels.csv")
    else:
        raise InvalidParameterError(f"unknown synth kind {kind!r}")
    return EXIT_OK


def _parse_resolution(r):
    r = str(r).lower()
    if "x" in r:
        a, b = r.split("x")
        return int(a), int(b)
    return int(r), int(r)


def convergence_rows(resolutions, graph_k=8):
    """Corner-to-corner geodesic vs exact Fisher distance on Gaussian grids.

    Each grid spans mu in [0, 1] and sigma in [1, 2] (a single step sits at
    the lower end). Edge (i, j), i < j, carries sqrt(2 KL(p_i || p_j)) from
    the closed form.
    """
    rows = []
    for res in resolutions:
        nm, ns = _parse_resolution(res)
        if nm < 1 or ns < 1 or nm * ns < 2:
            raise InvalidParameterError(f"resolution {res!r} needs at least two grid points")
        mus = np.linspace(0.0, 1.0, nm) if nm > 1 else np.zeros(1)
        sigmas = np.linspace(1.0, 2.0, ns) if ns > 1 else np.ones(1)
        params = [GaussianParams(float(m), float(s)) for m in mus for s in sigmas]
        n = len(params)
        v = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                v[i, j] = v[j, i] = math.sqrt(2.0 * kl_gaussian_closed(params[i], params[j]))
        D = DissimilarityMatrix(v, "fisher_kl", tuple(str(i) for i in range(n)))
        g = ensure_connected(build_neighbor_graph(D, min(graph_k, D.n - 1)), D)
        estimate = float(shortest_path_lengths(g, 0)[-1])
        exact = fisher_gaussian_closed(params[0], params[-1])
        label = str(res) if "x" in str(res).lower() else str(nm)
        rows.append((label, estimate, exact, abs(estimate - exact)))
    return rows


def cmd_validate_convergence(resolutions, out, graph_k=8):
    if len(resolutions) < 2:
        raise InvalidParameterError("need at least two resolutions")
    rows = convergence_rows(resolutions, graph_k)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["resolution", "estimate", "exact", "abs_error"])
        for label, est, ex, err in rows:
            w.writerow([label, fmt(est), fmt(ex), fmt(err)])
    return EXIT_OK


def cmd_plot_data(embedding_csv, by_label, out):
    """Split embedding rows into whitespace-separated per-class files."""
    ids, labels, coords = load_embedding_csv(embedding_csv)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if by_label:
        if any(x is None for x in labels):
            raise MissingLabelError("embedding has unlabelled rows")
        groups = {}
        for lab, row in zip(labels, coords):
            groups.setdefault(lab, []).append(row)
    else:
        groups = {None: list(coords)}
    for lab, rows in sorted(groups.items(), key=lambda kv: (kv[0] is None, kv[0] or 0)):
        name = "embedding.dat" if lab is None else f"class_{lab}.dat"
        with open(out / name, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(" ".join(fmt(x) for x in row) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument handling


def _float_list(s):
    return [float(x) for x in str(s).split(",") if x.strip()]


def _int_list(s):
    return [int(x) for x in str(s).split(",") if x.strip()]


def _heat(s):
    return math.inf if str(s).lower() in ("inf", "infinity") else float(s)


def _add_pipeline_flags(p):
    p.add_argument("--config", help="JSON file of config values; flags override it")
    p.add_argument("--input")
    p.add_argument("--labels", help="doc_id,label file for term-count input")
    p.add_argument("--pdf-kind", dest="pdf_kind", choices=["kde", "multinomial", "gaussian_params"])
    p.add_argument("--metric", choices=["fisher_kl", "hellinger", "cosine", "euclidean_l2",
                                        "fisher_exact_gaussian"])
    p.add_argument("--geodesic", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--graph-k", dest="graph_k", type=int)
    p.add_argument("--embed", choices=["cmds", "lem", "ccdr", "pca"])
    p.add_argument("--dim", type=int)
    p.add_argument("--heat-t", dest="heat_t", type=_heat)
    p.add_argument("--beta", type=_float_list, help="comma-separated CCDR label weights")
    p.add_argument("--knn-k", dest="knn_k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--max-negative-mass", dest="max_negative_mass", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="fine", description="Fisher information non-parametric embedding")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    _add_pipeline_flags(sub.add_parser("embed", help="run the full pipeline"))
    _add_pipeline_flags(sub.add_parser("distances", help="write the dissimilarity matrix only"))

    ev = sub.add_parser("eval-classify", help="cross-validated classification")
    _add_pipeline_flags(ev)
    ev.add_argument("--train-frac", dest="train_frac", type=float)
    ev.add_argument("--folds", type=int)
    ev.add_argument("--classifier", choices=["knn", "kernel_nearest_mean"])
    ev.add_argument("--diffusion-t", dest="diffusion_t", type=_float_list)
    ev.add_argument("--dim-sweep", dest="dim_sweep", type=_int_list)

    syn = sub.add_parser("synth", help="write a synthetic data set")
    syn.add_argument("kind", choices=["swiss-roll", "gaussian-grid", "multinomial-clusters"])
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--out", required=True)
    syn.add_argument("--n-sets", dest="n_sets", type=int)
    syn.add_argument("--samples-per-set", dest="samples_per_set", type=int)
    syn.add_argument("--noise-scale", dest="noise_scale", type=float)
    syn.add_argument("--alpha", type=float)
    syn.add_argument("--beta", type=float)
    syn.add_argument("--k-steps", dest="k_steps", type=int)
    syn.add_argument("--l-steps", dest="l_steps", type=int)
    syn.add_argument("--n-classes", dest="n_classes", type=int)
    syn.add_argument("--dict-size", dest="dict_size", type=int)
    syn.add_argument("--docs-per-class", dest="docs_per_class", type=int)
    syn.add_argument("--counts-per-doc", dest="counts_per_doc", type=int)
    syn.add_argument("--concentration", type=float)

    val = sub.add_parser("validate-convergence", help="geodesic convergence on Gaussian grids")
    val.add_argument("--resolutions", type=lambda s: [x.strip() for x in s.split(",") if x.strip()],
                     default=["5", "10", "20"])
    val.add_argument("--graph-k", dest="graph_k", type=int, default=8)
    val.add_argument("--out", required=True)

    pl = sub.add_parser("plot-data", help="split an embedding into per-class plot files")
    pl.add_argument("--input", required=True)
    pl.add_argument("--by-label", dest="by_label", action="store_true")
    pl.add_argument("--out", required=True)
    return parser


_PIPELINE_KEYS = ("input", "labels", "pdf_kind", "metric", "geodesic", "graph_k", "embed", "dim",
                  "heat_t", "beta", "knn_k", "seed", "out", "max_negative_mass", "train_frac",
                  "folds", "classifier", "diffusion_t", "dim_sweep")


def config_from_args(args):
    base = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            base = json.load(fh)
    for key in _PIPELINE_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    cfg = PipelineConfig.from_dict(base)
    if cfg.input is None or cfg.out is None:
        raise InvalidParameterError("--input and --out are required")
    return cfg.resolve()


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="fine: %(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("embed", "distances", "eval-classify"):
            with _Stage("config"):
                cfg = config_from_args(args)
            fn = {"embed": cmd_embed, "distances": cmd_distances,
                  "eval-classify": cmd_eval_classify}[args.command]
            return fn(cfg)
        if args.command == "synth":
            keys = ("n_sets", "samples_per_set", "noise_scale", "alpha", "beta", "k_steps",
                    "l_steps", "n_classes", "dict_size", "docs_per_class", "counts_per_doc",
                    "concentration")
            params = {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
            with _Stage("synth"):
                return cmd_synth(args.kind.replace("-", "_"), params, args.seed, args.out)
        if args.command == "validate-convergence":
            with _Stage("validate"):
                return cmd_validate_convergence(args.resolutions, args.out, args.graph_k)
        with _Stage("plot-data"):
            return cmd_plot_data(args.input, args.by_label, args.out)
    except StageError as e:
        print(f"fine: error in stage '{e.stage}': {type(e.exc).__name__}: {e.exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
