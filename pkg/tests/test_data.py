import numpy as np
import pytest

from uslearn.cluster import Clustering
from uslearn.data import (
    DataFormatError,
    GaussianSpec,
    PointSet,
    gen_gaussians,
    load_dermatology,
    load_features,
    load_labels,
    load_points_csv,
    minmax_scale,
    pairwise_features,
    save_features,
    save_labels,
    save_points_csv,
)
from uslearn.simgraph import FeatureTensor, ParamMode, ParamSet, build_similarity


class TestGenGaussians:
    def test_same_seed_identical(self):
        spec = GaussianSpec(counts=(10, 12, 9, 11), d_noise=3)
        a = gen_gaussians(spec, seed=5)
        b = gen_gaussians(spec, seed=5)
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(a.labels.labels, b.labels.labels)

    def test_shape_matches_table_row(self):
        spec = GaussianSpec(counts=(100, 150, 120, 130), d_noise=8)
        p = gen_gaussians(spec, seed=1)
        assert p.n == 500
        assert p.dim == 10

    def test_smallest_benchmark_shape(self):
        spec = GaussianSpec(counts=(80, 100, 90, 80), d_noise=2)
        p = gen_gaussians(spec, seed=1)
        assert p.n == 350
        assert p.dim == 4

    def test_labels_match_blob_membership(self):
        spec = GaussianSpec(counts=(20, 20, 20, 20), d_noise=0)
        p = gen_gaussians(spec, seed=2)
        means = np.array(spec.means)
        for k in range(1, 5):
            blob = p.points[p.labels.labels == k]
            assert np.linalg.norm(blob.mean(axis=0) - means[k - 1]) < 1.0

    def test_tiny_deviation_no_noise_clusters_cleanly(self):
        spec = GaussianSpec(devs=(0.01,) * 4, counts=(8, 8, 8, 8), d_noise=0)
        p = gen_gaussians(spec, seed=3)
        x = pairwise_features(p)
        s = build_similarity(x, None, ParamSet.uniform(ParamMode.SHARED, 4, 2, 1.0))
        from uslearn.cluster import classification_error, cluster_spectral

        best = cluster_spectral(s, 4, restarts=6, seed=0).best.clustering
        assert classification_error(best, p.labels) == 0.0

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError):
            GaussianSpec(counts=(10, 10, 10))
        with pytest.raises(ValueError):
            GaussianSpec(devs=(0.5, 0.8, -1.0, 0.6))
        with pytest.raises(ValueError):
            GaussianSpec(counts=(10, 10, 0, 10))


class TestPairwiseFeatures:
    def test_coordinate_distances(self):
        p = PointSet(np.array([[0.0, 0.0], [3.0, 4.0]]))
        x = pairwise_features(p)
        np.testing.assert_allclose(x.values[0, 1], [3.0, 4.0])
        np.testing.assert_allclose(x.values[1, 0], [3.0, 4.0])

    def test_duplicate_points_give_unit_similarity(self, rng):
        p = PointSet(np.array([[1.5, -2.0], [1.5, -2.0], [0.0, 0.0]]))
        x = pairwise_features(p)
        s = build_similarity(x, None, ParamSet.uniform(ParamMode.SHARED, 1, 2, rng.random()))
        assert s.values[0, 1] == 1.0

    def test_single_point(self):
        x = pairwise_features(PointSet(np.array([[1.0, 2.0, 3.0]])))
        assert x.values.shape == (1, 1, 3)
        assert (x.values == 0).all()

    @pytest.mark.parametrize("seed", range(4))
    def test_invariants_hold(self, seed):
        rng = np.random.default_rng(seed)
        p = PointSet(rng.normal(size=(9, 4)))
        x = pairwise_features(p)  # FeatureTensor validates symmetry/nonneg/diag
        assert x.n == 9 and x.F == 4


class TestPointsCsv:
    def test_round_trip(self, rng, tmp_path):
        p = PointSet(rng.normal(size=(12, 3)))
        path = tmp_path / "pts.csv"
        save_points_csv(path, p)
        back = load_points_csv(path)
        np.testing.assert_array_equal(back.points, p.points)

    def test_labeled_round_trip(self, rng, tmp_path):
        labels = Clustering(np.array([1, 2, 1, 3, 2, 3]), 3)
        p = PointSet(rng.normal(size=(6, 2)), labels)
        path = tmp_path / "pts.csv"
        save_points_csv(path, p, with_labels=True)
        back = load_points_csv(path, labeled=True)
        np.testing.assert_array_equal(back.points, p.points)
        np.testing.assert_array_equal(back.labels.labels, labels.labels)

    def test_bad_row_reports_line(self, tmp_path):
        path = tmp_path / "pts.csv"
        path.write_text("1.0,2.0\n1.0,oops\n")
        with pytest.raises(DataFormatError, match="line 2"):
            load_points_csv(path)

    def test_ragged_row_reports_line(self, tmp_path):
        path = tmp_path / "pts.csv"
        path.write_text("1.0,2.0\n3.0\n")
        with pytest.raises(DataFormatError, match="line 2"):
            load_points_csv(path)


class TestLabelsFile:
    def test_round_trip(self, tmp_path):
        c = Clustering(np.array([2, 1, 3, 3, 2, 1]), 3)
        path = tmp_path / "labels.txt"
        save_labels(path, c)
        back = load_labels(path)
        np.testing.assert_array_equal(back.labels, c.labels)

    def test_gap_in_ids_rejected(self, tmp_path):
        path = tmp_path / "labels.txt"
        path.write_text("1\n2\n4\n")
        with pytest.raises(DataFormatError, match="missing"):
            load_labels(path)

    def test_non_integer_rejected(self, tmp_path):
        path = tmp_path / "labels.txt"
        path.write_text("1\nx\n")
        with pytest.raises(DataFormatError, match="line 2"):
            load_labels(path)


class TestFeatureTensorFile:
    def test_binary_round_trip(self, rng, tmp_path):
        raw = rng.random((7, 7, 3))
        raw = raw + raw.transpose(1, 0, 2)
        idx = np.arange(7)
        raw[idx, idx, :] = 0
        x = FeatureTensor(raw)
        path = tmp_path / "features.uslf"
        save_features(path, x)
        back = load_features(path)
        np.testing.assert_array_equal(back.values, x.values)

    def test_magic_header(self, tmp_path):
        x = pairwise_features(PointSet(np.array([[0.0], [1.0]])))
        path = tmp_path / "f.uslf"
        save_features(path, x)
        assert path.read_bytes()[:4] == b"USLF"

    def test_truncated_payload_rejected(self, tmp_path):
        x = pairwise_features(PointSet(np.array([[0.0], [1.0]])))
        path = tmp_path / "f.uslf"
        save_features(path, x)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DataFormatError, match="truncated"):
            load_features(path)

    def test_text_pair_list(self, tmp_path):
        path = tmp_path / "pairs.txt"
        path.write_text("# i j features\n1 2 0.5 1.5\n1 3 2.0 0.0\n")
        x = load_features(path)
        assert x.n == 3 and x.F == 2
        np.testing.assert_allclose(x.values[0, 1], [0.5, 1.5])
        np.testing.assert_allclose(x.values[2, 0], [2.0, 0.0])
        np.testing.assert_allclose(x.values[1, 2], [0.0, 0.0])


def write_dermatology_fixture(path, n_rows=366, n_missing=8, seed=0):
    """Format-faithful stand-in for the UCI raw file: 34 attributes + class,
    with `n_missing` rows carrying "?" in the age column."""
    rng = np.random.default_rng(seed)
    missing_rows = set(rng.choice(n_rows, size=n_missing, replace=False).tolist())
    lines = []
    for i in range(n_rows):
        attrs = [str(int(v)) for v in rng.integers(0, 4, size=33)]
        age = "?" if i in missing_rows else str(int(rng.integers(10, 75)))
        cls = str(int(rng.integers(1, 7)))
        lines.append(",".join(attrs + [age, cls]))
    # make sure every class appears among the complete rows
    complete = [i for i in range(n_rows) if i not in missing_rows]
    for cls, row in zip(range(1, 7), complete):
        parts = lines[row].split(",")
        parts[-1] = str(cls)
        lines[row] = ",".join(parts)
    path.write_text("\n".join(lines) + "\n")


class TestDermatologyLoader:
    def test_drops_incomplete_rows(self, tmp_path):
        path = tmp_path / "dermatology.data"
        write_dermatology_fixture(path)
        p = load_dermatology(path)
        assert p.n == 358
        assert p.dim == 34
        assert p.labels.K == 6

    def test_features_scaled_to_unit_interval(self, tmp_path):
        path = tmp_path / "dermatology.data"
        write_dermatology_fixture(path)
        p = load_dermatology(path)
        assert p.points.min() >= 0.0 and p.points.max() <= 1.0
        assert p.points.max(axis=0).min() == pytest.approx(1.0)  # every column spans to 1

    def test_wrong_field_count_reports_line(self, tmp_path):
        path = tmp_path / "bad.data"
        path.write_text("1,2,3\n")
        with pytest.raises(DataFormatError, match="35 fields"):
            load_dermatology(path)


class TestMinmaxScale:
    def test_constant_column_maps_to_zero(self):
        pts = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        scaled = minmax_scale(pts)
        np.testing.assert_allclose(scaled[:, 0], [0.0, 0.5, 1.0])
        np.testing.assert_allclose(scaled[:, 1], 0.0)
