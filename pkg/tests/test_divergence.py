import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from fine.datasets import GaussianParams, gen_gaussian_grid
from fine.density import fit_kde, term_frequency_pdf
from fine.divergence import (
    DissimilarityMatrix,
    alpha_divergence_multinomial,
    build_dissimilarity_matrix,
    cosine_multinomial,
    fisher_approx_from_kl,
    fisher_gaussian_closed,
    hellinger_multinomial,
    kl_empirical,
    kl_empirical_raw,
    kl_gaussian_closed,
    kl_symmetric,
)
from fine.errors import DimensionError, MetricMismatchError, SupportError

from conftest import random_simplex

G = GaussianParams


def kl_quadrature(a, b):
    """KL(a || b) by numerical integration, independent of the closed form."""
    f = lambda x: norm.pdf(x, a.mu, a.sigma) * (
        norm.logpdf(x, a.mu, a.sigma) - norm.logpdf(x, b.mu, b.sigma))
    lo, hi = a.mu - 40 * a.sigma, a.mu + 40 * a.sigma
    return quad(f, lo, hi, limit=200)[0]


def fisher_hyperbolic(a, b):
    """Fisher distance via the Poincare half-plane arccosh formula."""
    arg = 1 + ((a.mu - b.mu) ** 2 / 2 + (a.sigma - b.sigma) ** 2) / (2 * a.sigma * b.sigma)
    return math.sqrt(2) * math.acosh(arg)


params = st.builds(G, st.floats(-5, 5), st.floats(0.1, 5))


class TestGaussianClosedForms:
    def test_kl_examples(self):
        assert kl_gaussian_closed(G(0, 1), G(1, 1)) == pytest.approx(0.5, abs=1e-15)
        assert kl_gaussian_closed(G(0, 1), G(0, 2)) == pytest.approx(0.3181471805599453, rel=1e-14)
        assert kl_gaussian_closed(G(0.3, 2), G(0.3, 2)) == 0.0

    def test_kl_matches_quadrature(self, rng):
        for _ in range(10):
            a = G(rng.uniform(-2, 2), rng.uniform(0.5, 2))
            b = G(rng.uniform(-2, 2), rng.uniform(0.5, 2))
            assert kl_gaussian_closed(a, b) == pytest.approx(kl_quadrature(a, b), rel=1e-7, abs=1e-10)

    def test_fisher_example(self):
        assert fisher_gaussian_closed(G(0, 1), G(1, 1)) == pytest.approx(0.9802581434685472, abs=1e-12)

    def test_fisher_identity(self):
        assert fisher_gaussian_closed(G(0.6, 1.5), G(0.6, 1.5)) == 0.0

    @given(params, params)
    def test_fisher_matches_hyperbolic(self, a, b):
        # arccosh near 1 only resolves distances to about sqrt(eps)
        assert fisher_gaussian_closed(a, b) == pytest.approx(fisher_hyperbolic(a, b),
                                                             rel=1e-9, abs=1e-7)

    @given(params, params)
    def test_fisher_symmetric(self, a, b):
        assert fisher_gaussian_closed(a, b) == pytest.approx(fisher_gaussian_closed(b, a),
                                                             rel=1e-14, abs=0)

    def test_fisher_local_metric(self):
        # ds^2 = (dmu^2 + 2 dsigma^2) / sigma^2 for the normal family
        a = G(0.6, 1.5)
        for dm, ds in [(1e-5, 0), (0, 1e-5), (3e-6, -4e-6)]:
            b = G(a.mu + dm, a.sigma + ds)
            local = math.sqrt(dm * dm + 2 * ds * ds) / a.sigma
            assert fisher_gaussian_closed(a, b) == pytest.approx(local, rel=1e-4)

    def test_sqrt_dkl_example(self):
        a, b = G(0, 1), G(1, 1)
        assert kl_symmetric(a, b) == pytest.approx(1.0, abs=1e-15)
        assert fisher_approx_from_kl(a, b) == pytest.approx(1.0, abs=1e-15)
        assert fisher_approx_from_kl(a, a) == 0.0

    def test_local_approximation(self):
        a, b = G(0.6, 1.5), G(0.61, 1.5)
        approx = math.sqrt(2 * kl_gaussian_closed(a, b))
        assert abs(approx - fisher_gaussian_closed(a, b)) / fisher_gaussian_closed(a, b) < 0.01


class TestEmpiricalKl:
    def test_identical_is_zero(self, rng):
        p = fit_kde(rng.normal(size=(100, 2)))
        assert kl_empirical(p, p) == 0.0

    def test_matches_explicit_average(self, rng):
        p = fit_kde(rng.normal(size=(40, 1)))
        q = fit_kde(rng.normal(1, 1, size=(40, 1)))
        expect = np.mean([p.log_pdf(x) - q.log_pdf(x) for x in p.samples])
        assert kl_empirical_raw(p, q) == pytest.approx(expect, rel=1e-13)

    def test_clamped_non_negative(self, rng):
        x = rng.normal(size=(5, 1))
        p = fit_kde(x, bandwidths=[1.0])
        q = fit_kde(x + 1e-9, bandwidths=[1.0])
        assert kl_empirical(p, q) >= 0.0

    def test_asymmetric(self, rng):
        p = fit_kde(rng.normal(0, 1, size=(200, 1)))
        q = fit_kde(rng.normal(0, 3, size=(200, 1)))
        assert kl_empirical(p, q) != pytest.approx(kl_empirical(q, p), rel=0.05)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            kl_empirical(fit_kde(rng.normal(size=(5, 1))), fit_kde(rng.normal(size=(5, 2))))


class TestMultinomial:
    def test_hellinger_examples(self):
        assert hellinger_multinomial([1, 0], [1, 0]) == 0.0
        assert hellinger_multinomial([1, 0], [0, 1]) == pytest.approx(math.sqrt(2), abs=1e-15)
        assert hellinger_multinomial([0.5, 0.5], [1, 0]) == pytest.approx(0.7653668647301795,
                                                                        rel=1e-14)

    def test_cosine_examples(self):
        assert cosine_multinomial([0.2, 0.8], [0.2, 0.8]) == 0.0
        assert cosine_multinomial([1, 0], [0, 1]) == pytest.approx(math.pi, abs=1e-15)

    def test_cosine_hellinger_relation(self, rng):
        # sum sqrt(pq) = 1 - D_H^2 / 2 under the unnormalised Hellinger
        p, q = random_simplex(rng, 6, 200), random_simplex(rng, 6, 200)
        for a, b in zip(p, q):
            dh = hellinger_multinomial(a, b)
            assert cosine_multinomial(a, b) == pytest.approx(2 * math.acos(1 - dh * dh / 2),
                                                             abs=1e-7)

    def test_alpha_examples(self):
        p, q = [0.5, 0.5], [0.25, 0.75]
        assert alpha_divergence_multinomial(p, q, -1) == pytest.approx(0.14384103622589045,
                                                                       rel=1e-13)
        assert alpha_divergence_multinomial(q, p, 1) == pytest.approx(0.14384103622589045,
                                                                      rel=1e-13)
        assert alpha_divergence_multinomial(p, p, 0.3) == pytest.approx(0.0, abs=1e-15)

    def test_alpha_zero_is_twice_squared_hellinger(self, rng):
        for a, b in zip(random_simplex(rng, 5, 50, zeros=0.3), random_simplex(rng, 5, 50)):
            dh = hellinger_multinomial(a, b)
            assert alpha_divergence_multinomial(a, b, 0) == pytest.approx(2 * dh * dh, abs=1e-12)

    def test_alpha_general_formula(self, rng):
        p, q = random_simplex(rng, 7), random_simplex(rng, 7)
        alpha = 0.4
        s = np.sum(p ** 0.3 * q ** 0.7)
        assert alpha_divergence_multinomial(p, q, alpha) == pytest.approx(4 / 0.84 * (1 - s),
                                                                          rel=1e-12)

    def test_alpha_support_error(self):
        with pytest.raises(SupportError):
            alpha_divergence_multinomial([0.5, 0.5], [1.0, 0.0], -1)
        with pytest.raises(SupportError):
            alpha_divergence_multinomial([1.0, 0.0], [0.5, 0.5], 1)

    def test_alpha_zero_tolerates_disjoint(self):
        assert alpha_divergence_multinomial([1, 0], [0, 1], 0) == pytest.approx(4.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            hellinger_multinomial([1.0], [0.5, 0.5])
        with pytest.raises(DimensionError):
            cosine_multinomial([1.0], [0.5, 0.5])

    def test_nearby_hellinger_tracks_sphere_metric(self, rng):
        for _ in range(100):
            p = random_simplex(rng, 4) * 0.9 + 0.025
            step = rng.normal(size=4)
            step -= step.mean()
            step *= 5e-4 / np.abs(step).sum()
            q = p + step
            dc = cosine_multinomial(p, q)
            assert abs(2 * hellinger_multinomial(p, q) - dc) / dc < 1e-3

    @settings(max_examples=200)
    @given(st.lists(st.floats(0, 1), min_size=3, max_size=3),
           st.lists(st.floats(0, 1), min_size=3, max_size=3),
           st.lists(st.floats(0, 1), min_size=3, max_size=3))
    def test_hellinger_triangle(self, a, b, c):
        vs = []
        for v in (a, b, c):
            v = np.array(v) + 1e-3
            vs.append(v / v.sum())
        p, q, r = vs
        assert hellinger_multinomial(p, r) <= (hellinger_multinomial(p, q)
                                               + hellinger_multinomial(q, r) + 1e-12)


class TestMatrix:
    def test_single(self):
        m = build_dissimilarity_matrix([G(0, 1)], "fisher_exact_gaussian")
        np.testing.assert_array_equal(m.values, [[0.0]])

    def test_gaussian_grid(self):
        grid = gen_gaussian_grid(0.1, 0.1, 10, 10)
        m = build_dissimilarity_matrix(grid.params, "fisher_exact_gaussian")
        assert m.values.shape == (100, 100)
        i = grid.params.index(G(grid.params[54].mu, grid.params[54].sigma))
        j = 99
        assert grid.params[i].mu == pytest.approx(0.6) and grid.params[i].sigma == pytest.approx(1.5)
        assert grid.params[j].mu == pytest.approx(1.0) and grid.params[j].sigma == pytest.approx(2.0)
        assert m.values[i, i] == 0.0 and m.values[i, j] > 0
        assert m.values[i, j] == fisher_gaussian_closed(grid.params[i], grid.params[j])

    def test_symmetric_zero_diagonal(self, rng):
        pdfs = [term_frequency_pdf(rng.integers(0, 5, size=12) + 1) for _ in range(9)]
        for metric in ("hellinger", "cosine", "euclidean_l2"):
            m = build_dissimilarity_matrix(pdfs, metric)
            np.testing.assert_array_equal(m.values, m.values.T)
            np.testing.assert_array_equal(np.diag(m.values), 0.0)
            assert np.all(m.values >= 0)

    def test_parallel_bitwise(self, rng, monkeypatch):
        monkeypatch.setenv("FINE_THREADS", "4")
        pdfs = [fit_kde(rng.normal(loc=i / 3, size=(30, 2))) for i in range(8)]
        a = build_dissimilarity_matrix(pdfs, "fisher_kl", parallel=False)
        b = build_dissimilarity_matrix(pdfs, "fisher_kl", parallel=True)
        assert a.values.tobytes() == b.values.tobytes()
        assert a.diagnostics == b.diagnostics

    def test_kde_entries_match_pairwise(self, rng):
        pdfs = [fit_kde(rng.normal(loc=i, size=(20, 1))) for i in range(4)]
        m = build_dissimilarity_matrix(pdfs, "fisher_kl")
        assert m.values[1, 3] == pytest.approx(fisher_approx_from_kl(pdfs[1], pdfs[3]), rel=1e-14)

    def test_metric_mismatch(self, rng):
        pdfs = [fit_kde(rng.normal(size=(5, 1))) for _ in range(2)]
        with pytest.raises(MetricMismatchError):
            build_dissimilarity_matrix(pdfs, "hellinger")
        with pytest.raises(MetricMismatchError):
            build_dissimilarity_matrix([term_frequency_pdf([1, 2])] * 2, "fisher_exact_gaussian")

    def test_mixed_kinds(self, rng):
        with pytest.raises(MetricMismatchError):
            build_dissimilarity_matrix([G(0, 1), term_frequency_pdf([1, 1])], "euclidean_l2")

    def test_csv_round_trip(self, tmp_path, rng):
        v = rng.random((4, 4))
        v = v + v.T
        np.fill_diagonal(v, 0)
        m = DissimilarityMatrix(v, "hellinger", ("a", "b", "c", "d"))
        m.to_csv(tmp_path / "d.csv")
        back = DissimilarityMatrix.from_csv(tmp_path / "d.csv", "hellinger")
        assert back.ids == m.ids
        np.testing.assert_array_equal(back.values, v)
