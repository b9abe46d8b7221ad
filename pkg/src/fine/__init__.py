"""Fisher information non-parametric embedding.

Estimate a density for each sample set, approximate pairwise Fisher
information distances with divergences and graph geodesics, and embed the
collection in a low-dimensional Euclidean space.
"""

__version__ = "0.1.0"

from .datasets import (
    DatasetCollection,
    Document,
    GaussianGrid,
    GaussianParams,
    SampleSet,
    gen_gaussian_grid,
    gen_multinomial_clusters,
    gen_swiss_roll_sets,
    load_collection,
    load_term_counts,
    save_collection,
)
from .density import (
    KernelDensityEstimate,
    MultinomialPdf,
    fit_kde,
    kde_log_eval,
    silverman_bandwidth,
    term_frequency_pdf,
)
from .divergence import (
    DissimilarityMatrix,
    alpha_divergence_multinomial,
    build_dissimilarity_matrix,
    cosine_multinomial,
    fisher_approx_from_kl,
    fisher_gaussian_closed,
    hellinger_multinomial,
    kl_empirical,
    kl_gaussian_closed,
    kl_symmetric,
)
from .geodesic import (
    NeighborGraph,
    build_neighbor_graph,
    ensure_connected,
    geodesic_distances,
)
from .embedding import (
    Embedding,
    LemParams,
    ccdr,
    classical_mds,
    laplacian_eigenmaps,
    pca_embed,
)
from .classify import (
    diffusion_kernel_multinomial,
    kernel_nearest_mean_classify,
    knn_classify,
)
from .linalg import jacobi_eigh
