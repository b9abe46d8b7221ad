import math

import numpy as np
import pytest

from fine.datasets import (
    DatasetCollection,
    SampleSet,
    gen_gaussian_grid,
    gen_multinomial_clusters,
    gen_swiss_roll_sets,
    load_collection,
    load_ground_truth,
    load_term_counts,
    load_term_label_names,
    multinomial_class_pdfs,
    save_collection,
    save_ground_truth,
    save_term_counts,
)
from fine.density import term_frequency_pdf
from fine.divergence import hellinger_multinomial
from fine.errors import (
    DegenerateDocumentError,
    EmptyInputError,
    FormatError,
    InvalidParameterError,
    ParseError,
)

from conftest import write


class TestLoadCollection:
    def test_two_sets_long_csv(self, tmp_path):
        p = write(tmp_path / "c.csv", "set_id,label,x1,x2\n"
                  "b,,1,2\nb,,3,4\nb,,5,6\n"
                  "a,,0.5,0.25\na,,1e-3,-2\na,,7,8\n")
        coll = load_collection(p)
        assert coll.ids == ["a", "b"]
        assert coll.dim == 2
        assert not coll.labels_present
        np.testing.assert_array_equal(coll[0].points, [[0.5, 0.25], [1e-3, -2], [7, 8]])
        np.testing.assert_array_equal(coll[1].points, [[1, 2], [3, 4], [5, 6]])

    def test_inconsistent_columns(self, tmp_path):
        p = write(tmp_path / "c.csv", "set_id,label,x1,x2,x3\n"
                  "a,,1,2,3\nb,,1,2\n")
        with pytest.raises(FormatError):
            load_collection(p)

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyInputError):
            load_collection(write(tmp_path / "c.csv", ""))

    def test_header_only(self, tmp_path):
        with pytest.raises(EmptyInputError):
            load_collection(write(tmp_path / "c.csv", "set_id,label,x1\n"))

    def test_non_numeric_reports_row(self, tmp_path):
        p = write(tmp_path / "c.csv", "set_id,label,x1\na,,1\na,,oops\n")
        with pytest.raises(ParseError) as err:
            load_collection(p)
        assert err.value.row == 3

    def test_conflicting_labels(self, tmp_path):
        p = write(tmp_path / "c.csv", "set_id,label,x1\na,0,1\na,1,2\n")
        with pytest.raises(FormatError):
            load_collection(p)

    def test_labels_present(self, tmp_path):
        p = write(tmp_path / "c.csv", "set_id,label,x1\na,1,1\nb,0,2\n")
        coll = load_collection(p)
        assert coll.labels_present
        assert coll.labels == [1, 0]

    def test_partial_labels_not_present(self, tmp_path):
        p = write(tmp_path / "c.csv", "set_id,label,x1\na,1,1\nb,,2\n")
        assert not load_collection(p).labels_present

    def test_directory_cytometry_layout(self, tmp_path, rng):
        # 23 CLL + 20 MCL patients, 5 channels each
        d = tmp_path / "patients"
        d.mkdir()
        rows = ["set_id,label"]
        for i in range(43):
            sid = f"p{i:02d}"
            n = int(rng.integers(20, 40))
            data = rng.normal(size=(n, 5))
            lines = ["fsc,ssc,cd45,cd23,fmc7"] + [",".join(format(v, ".17g") for v in r) for r in data]
            (d / f"{sid}.csv").write_text("\n".join(lines) + "\n")
            rows.append(f"{sid},{'CLL' if i < 23 else 'MCL'}")
        (d / "set_labels.csv").write_text("\n".join(rows) + "\n")
        coll = load_collection(d)
        assert len(coll) == 43
        assert coll.dim == 5
        assert coll.labels_present
        assert coll.label_names == {0: "CLL", 1: "MCL"}
        assert coll.labels.count(0) == 23 and coll.labels.count(1) == 20

    def test_directory_column_mismatch(self, tmp_path):
        d = tmp_path / "sets"
        d.mkdir()
        (d / "a.csv").write_text("x,y\n1,2\n")
        (d / "b.csv").write_text("x,y,z\n1,2,3\n")
        with pytest.raises(FormatError):
            load_collection(d)


class TestRoundTrip:
    def test_bit_exact(self, tmp_path, rng):
        sets = tuple(SampleSet(f"s{i}", rng.normal(size=(4, 3)) * 10.0 ** rng.integers(-5, 5),
                               i % 2) for i in range(5))
        coll = DatasetCollection(sets)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        save_collection(coll, p1)
        back = load_collection(p1)
        for s, t in zip(coll, back):
            assert s.id == t.id and s.label == t.label
            np.testing.assert_array_equal(s.points, t.points)
        save_collection(back, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_ground_truth(self, tmp_path):
        _, y = gen_swiss_roll_sets(5, 2, 0.1, seed=3)
        ids = [f"s{i:03d}" for i in range(5)]
        save_ground_truth(ids, y, tmp_path / "g.csv")
        ids2, y2 = load_ground_truth(tmp_path / "g.csv")
        assert ids2 == ids
        np.testing.assert_array_equal(y, y2)


class TestTermCounts:
    def test_triplets_to_vector(self, tmp_path):
        p = write(tmp_path / "t.csv", "doc_id,term_index,count\nd1,0,2\nd1,3,1\n")
        (doc,) = load_term_counts(p, dict_size=4)
        np.testing.assert_array_equal(doc.counts, [2, 0, 0, 1])

    def test_zero_document(self, tmp_path):
        p = write(tmp_path / "t.csv", "doc_id,term_index,count\nd1,0,0\nd2,1,3\n")
        with pytest.raises(DegenerateDocumentError):
            load_term_counts(p)

    def test_negative_count(self, tmp_path):
        p = write(tmp_path / "t.csv", "doc_id,term_index,count\nd1,0,-1\n")
        with pytest.raises(FormatError):
            load_term_counts(p)

    def test_named_labels(self, tmp_path):
        lines = ["doc_id,term_index,count"]
        labs = ["doc_id,label"]
        for i, dom in enumerate(["comp", "rec", "sci", "talk"] * 2):
            lines.append(f"doc{i},{i},3")
            labs.append(f"doc{i},{dom}")
        p = write(tmp_path / "t.csv", "\n".join(lines) + "\n")
        lp = write(tmp_path / "l.csv", "\n".join(labs) + "\n")
        docs = load_term_counts(p, lp)
        assert [d.label for d in docs] == [0, 1, 2, 3, 0, 1, 2, 3]
        assert load_term_label_names(lp) == {0: "comp", 1: "rec", 2: "sci", 3: "talk"}

    def test_round_trip(self, tmp_path):
        docs = gen_multinomial_clusters(2, 10, 3, 20, 0.5, seed=1)
        save_term_counts(docs, tmp_path / "t.csv", tmp_path / "l.csv")
        back = load_term_counts(tmp_path / "t.csv", tmp_path / "l.csv", dict_size=10)
        for a, b in zip(docs, back):
            assert a.id == b.id and a.label == b.label
            np.testing.assert_array_equal(a.counts, b.counts)


class TestGaussianGrid:
    def test_ten_by_ten(self):
        grid = gen_gaussian_grid(0.1, 0.1, 10, 10)
        assert len(grid.params) == 100
        assert grid.grid_shape == (10, 10)
        mus = sorted({round(p.mu, 12) for p in grid.params})
        sigmas = sorted({round(p.sigma, 12) for p in grid.params})
        np.testing.assert_allclose(mus, np.arange(1, 11) / 10)
        np.testing.assert_allclose(sigmas, 1 + np.arange(1, 11) / 10)

    def test_row_major_and_reference_point(self):
        grid = gen_gaussian_grid(0.1, 0.1, 10, 10)
        # (k, l) = (6, 5) -> index (6-1)*10 + (5-1)
        p = grid.params[5 * 10 + 4]
        assert math.isclose(p.mu, 0.6) and math.isclose(p.sigma, 1.5)
        assert grid.params[0].mu == pytest.approx(0.1) and grid.params[1].sigma == pytest.approx(1.2)

    def test_non_positive_sigma(self):
        with pytest.raises(InvalidParameterError):
            gen_gaussian_grid(0.1, -2.0, 1, 1)


class TestSwissRoll:
    def test_zero_noise(self):
        coll, y = gen_swiss_roll_sets(6, 10, 0.0, seed=5)
        for s, yi in zip(coll, y):
            np.testing.assert_array_equal(s.points, np.broadcast_to(yi, s.points.shape))
            np.testing.assert_allclose(s.points.mean(axis=0), yi, rtol=1e-15, atol=0)

    def test_deterministic(self):
        a, ya = gen_swiss_roll_sets(200, 100, 0.5, seed=11)
        b, yb = gen_swiss_roll_sets(200, 100, 0.5, seed=11)
        np.testing.assert_array_equal(ya, yb)
        for s, t in zip(a, b):
            assert s.points.tobytes() == t.points.tobytes()

    def test_on_parameterisation(self):
        _, y = gen_swiss_roll_sets(300, 2, 0.5, seed=2)
        # radius in the (x, z) plane is t; the angle of (x, z) is t mod 2 pi
        t = np.hypot(y[:, 0], y[:, 2])
        assert np.all(t >= 1.5 * np.pi) and np.all(t <= 4.5 * np.pi)
        np.testing.assert_allclose(y[:, 0], t * np.cos(t), atol=1e-12)
        np.testing.assert_allclose(y[:, 2], t * np.sin(t), atol=1e-12)
        assert np.all((y[:, 1] >= 0) & (y[:, 1] <= 20))

    def test_preconditions(self):
        with pytest.raises(InvalidParameterError):
            gen_swiss_roll_sets(3, 10, 0.5, 0)
        with pytest.raises(InvalidParameterError):
            gen_swiss_roll_sets(10, 1, 0.5, 0)


def _class_mean_pdfs(docs, n_classes):
    out = []
    for c in range(n_classes):
        tf = [term_frequency_pdf(d.counts).probs for d in docs if d.label == c]
        out.append(np.mean(tf, axis=0))
    return out


class TestMultinomialClusters:
    def test_large_concentration_uniform(self):
        pdfs = multinomial_class_pdfs(4, 200, 1e9, seed=3)
        for a in pdfs:
            for b in pdfs:
                assert hellinger_multinomial(a, b) < 1e-3

    def test_disjoint_blocks(self):
        docs = gen_multinomial_clusters(2, 40, 20, 50, 1e-12, seed=4)
        a, b = _class_mean_pdfs(docs, 2)
        assert hellinger_multinomial(a, b) == pytest.approx(math.sqrt(2), abs=1e-9)

    def test_within_less_than_between(self):
        docs = gen_multinomial_clusters(4, 500, 100, 200, 0.05, seed=8)
        tf = np.array([term_frequency_pdf(d.counts).probs for d in docs])
        lab = np.array([d.label for d in docs])
        sq = np.sqrt(tf)
        # Hellinger via the Gram matrix of square roots
        H = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * sq @ sq.T))
        same = lab[:, None] == lab[None, :]
        off = ~np.eye(len(docs), dtype=bool)
        assert H[same & off].mean() < H[~same].mean()

    def test_deterministic_and_shape(self):
        a = gen_multinomial_clusters(3, 30, 5, 40, 0.3, seed=9)
        b = gen_multinomial_clusters(3, 30, 5, 40, 0.3, seed=9)
        assert len(a) == 15
        assert all(d.counts.sum() == 40 for d in a)
        assert all(np.array_equal(x.counts, y.counts) for x, y in zip(a, b))

    def test_dict_smaller_than_classes(self):
        with pytest.raises(InvalidParameterError):
            gen_multinomial_clusters(5, 4, 2, 10, 1.0, seed=0)
