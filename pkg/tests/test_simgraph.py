import math

import numpy as np
import pytest

from conftest import random_clustering, random_feature_tensor, random_params
from uslearn.cluster import Clustering
from uslearn.simgraph import (
    DegenerateRowError,
    FeatureTensor,
    ParamMode,
    ParamSet,
    SimilarityMatrix,
    build_similarity,
    similarity_gradient,
    transition,
)

ALL_MODES = list(ParamMode)


def tensor_from_entries(n, F, entries):
    """entries: {(i, j, f): value} with 0-based indices, mirrored automatically."""
    x = np.zeros((n, n, F))
    for (i, j, f), v in entries.items():
        x[i, j, f] = v
        x[j, i, f] = v
    return FeatureTensor(x)


class TestFeatureTensor:
    def test_rejects_negative(self):
        x = np.zeros((2, 2, 1))
        x[0, 1, 0] = x[1, 0, 0] = -1.0
        with pytest.raises(ValueError, match="non-negative"):
            FeatureTensor(x)

    def test_rejects_asymmetric(self):
        x = np.zeros((2, 2, 1))
        x[0, 1, 0] = 1.0
        with pytest.raises(ValueError, match="symmetric"):
            FeatureTensor(x)

    def test_rejects_nonzero_diagonal(self):
        x = np.zeros((2, 2, 1))
        x[0, 0, 0] = 0.5
        with pytest.raises(ValueError, match="diagonal"):
            FeatureTensor(x)


class TestParamSet:
    def test_rejects_negative_values(self):
        with pytest.raises(ValueError, match="non-negative"):
            ParamSet(ParamMode.SHARED, 1, 2, np.array([1.0, -0.1]))

    def test_rejects_asymmetric_pair(self):
        v = np.zeros((2, 2, 1))
        v[0, 1, 0] = 1.0
        with pytest.raises(ValueError, match="symmetric"):
            ParamSet(ParamMode.PAIR, 2, 1, v)

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError, match="shape"):
            ParamSet(ParamMode.CLUSTER_SUM, 2, 3, np.zeros((3, 2)))

    @pytest.mark.parametrize("mode", ALL_MODES)
    def test_vector_round_trip(self, rng, mode):
        params = random_params(rng, mode, K=3, F=2)
        back = params.replace_vector(params.to_vector())
        np.testing.assert_array_equal(back.values, params.values)

    def test_pair_vector_restores_symmetry(self):
        params = ParamSet.uniform(ParamMode.PAIR, 3, 2, 0.0)
        vec = np.arange(1.0, params.n_params + 1)
        new = params.replace_vector(vec)
        np.testing.assert_array_equal(new.values, new.values.transpose(1, 0, 2))
        np.testing.assert_array_equal(new.to_vector(), vec)


class TestBuildSimilarity:
    def test_zero_theta_gives_all_ones(self, rng):
        x = random_feature_tensor(rng, 5, 3)
        s = build_similarity(x, None, ParamSet.uniform(ParamMode.SHARED, 1, 3, 0.0))
        np.testing.assert_allclose(s.values, 1.0)
        np.testing.assert_allclose(s.volumes, 5.0)

    def test_shared_log2_example(self):
        x = tensor_from_entries(2, 1, {(0, 1, 0): math.log(2.0)})
        s = build_similarity(x, None, ParamSet(ParamMode.SHARED, 1, 1, np.array([1.0])))
        assert s.values[0, 1] == pytest.approx(0.5)
        assert s.values[0, 0] == 1.0 and s.values[1, 1] == 1.0
        assert s.volumes[0] == pytest.approx(1.5)

    def test_cluster_product_switches_off_cross_pair(self):
        x = tensor_from_entries(2, 1, {(0, 1, 0): 1.0})
        params = ParamSet(ParamMode.CLUSTER_PRODUCT, 2, 1, np.array([[2.0], [0.0]]))
        labels = Clustering(np.array([1, 2]), 2)
        s = build_similarity(x, labels, params)
        assert s.values[0, 1] == pytest.approx(1.0)

    def test_cluster_sum_adds_both_sides(self):
        x = tensor_from_entries(2, 1, {(0, 1, 0): 1.0})
        params = ParamSet(ParamMode.CLUSTER_SUM, 2, 1, np.array([[2.0], [3.0]]))
        labels = Clustering(np.array([1, 2]), 2)
        s = build_similarity(x, labels, params)
        assert s.values[0, 1] == pytest.approx(math.exp(-5.0))

    def test_pair_mode_uses_pair_block(self):
        x = tensor_from_entries(2, 1, {(0, 1, 0): 1.0})
        v = np.zeros((2, 2, 1))
        v[0, 1, 0] = v[1, 0, 0] = 4.0
        v[0, 0, 0] = 1.0
        v[1, 1, 0] = 2.0
        params = ParamSet(ParamMode.PAIR, 2, 1, v)
        labels = Clustering(np.array([1, 2]), 2)
        s = build_similarity(x, labels, params)
        assert s.values[0, 1] == pytest.approx(math.exp(-4.0))

    def test_label_dependent_mode_requires_labels(self, rng):
        x = random_feature_tensor(rng, 4, 2)
        params = random_params(rng, ParamMode.CLUSTER_SUM, 2, 2)
        with pytest.raises(ValueError, match="label-dependent"):
            build_similarity(x, None, params)

    def test_dimension_mismatch_rejected(self, rng):
        x = random_feature_tensor(rng, 4, 2)
        with pytest.raises(ValueError, match="feature count"):
            build_similarity(x, None, ParamSet.uniform(ParamMode.SHARED, 1, 3, 1.0))
        params = random_params(rng, ParamMode.CLUSTER_SUM, 3, 2)
        with pytest.raises(ValueError, match="K="):
            build_similarity(x, random_clustering(rng, 4, 2), params)

    @pytest.mark.parametrize("mode", ALL_MODES)
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_output_symmetric_in_unit_interval(self, mode, seed):
        rng = np.random.default_rng(seed)
        x = random_feature_tensor(rng, 7, 3)
        labels = random_clustering(rng, 7, 3)
        params = random_params(rng, mode, 3, 3, scale=2.0)
        s = build_similarity(x, labels, params)
        np.testing.assert_array_equal(s.values, s.values.T)
        assert (s.values > 0).all() and (s.values <= 1.0).all()
        np.testing.assert_allclose(np.diag(s.values), 1.0)

    def test_huge_exponent_is_clamped_not_nan(self):
        x = tensor_from_entries(2, 1, {(0, 1, 0): 10.0})
        s = build_similarity(x, None, ParamSet(ParamMode.SHARED, 1, 1, np.array([1e6])))
        assert np.isfinite(s.values).all()
        assert s.values[0, 1] > 0.0

    @pytest.mark.parametrize("mode", [ParamMode.CLUSTER_PRODUCT, ParamMode.CLUSTER_SUM, ParamMode.PAIR])
    def test_label_equivariance_under_relabeling(self, rng, mode):
        # permuting cluster ids and the parameter blocks identically leaves S unchanged
        n, K, F = 8, 3, 2
        x = random_feature_tensor(rng, n, F)
        labels = random_clustering(rng, n, K)
        params = random_params(rng, mode, K, F)
        s = build_similarity(x, labels, params)

        perm = np.array([2, 0, 1])  # new_id0[c] = perm[c]
        new_labels = Clustering(perm[labels.labels - 1] + 1, K)
        inv = np.argsort(perm)
        if mode is ParamMode.PAIR:
            permuted = params.values[np.ix_(inv, inv)]
        else:
            permuted = params.values[inv]
        s2 = build_similarity(x, new_labels, ParamSet(mode, K, F, permuted))
        np.testing.assert_allclose(s2.values, s.values, atol=1e-15)


class TestSimilarityMatrix:
    def test_degenerate_row_names_the_row(self):
        values = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        with pytest.raises(DegenerateRowError) as err:
            SimilarityMatrix(values)
        assert err.value.row == 1

    def test_entries_above_one_allowed_for_hand_built(self):
        s = SimilarityMatrix(np.array([[1.0, 1.0], [1.0, 3.0]]))
        np.testing.assert_allclose(s.volumes, [2.0, 4.0])


class TestTransition:
    def test_swap_matrix(self):
        s = SimilarityMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        p = transition(s)
        np.testing.assert_allclose(p.values, [[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(p.pi, [0.5, 0.5])

    def test_direct_arithmetic(self):
        s = SimilarityMatrix(np.array([[1.0, 1.0], [1.0, 3.0]]))
        p = transition(s)
        np.testing.assert_allclose(p.values, [[0.5, 0.5], [0.25, 0.75]])
        np.testing.assert_allclose(p.pi, [1.0 / 3.0, 2.0 / 3.0])

    def test_uniform_similarity(self):
        s = SimilarityMatrix(np.ones((4, 4)))
        p = transition(s)
        np.testing.assert_allclose(p.values, 0.25)

    @pytest.mark.parametrize("seed", range(5))
    def test_rows_and_pi_sum_to_one(self, seed):
        rng = np.random.default_rng(seed)
        x = random_feature_tensor(rng, 9, 2)
        s = build_similarity(x, None, random_params(rng, ParamMode.SHARED, 1, 2))
        p = transition(s)
        np.testing.assert_allclose(p.values.sum(axis=1), 1.0, atol=1e-12)
        assert abs(p.pi.sum() - 1.0) < 1e-12


class TestSimilarityGradient:
    def test_shared_at_zero_theta(self):
        x = tensor_from_entries(2, 1, {(0, 1, 0): 3.0})
        ev = similarity_gradient(x, None, ParamSet(ParamMode.SHARED, 1, 1, np.array([0.0])))
        assert ev.coordinate(0)[0, 1] == pytest.approx(-3.0)

    @pytest.mark.parametrize("mode", ALL_MODES)
    def test_zero_feature_pair_has_zero_derivative(self, rng, mode):
        x = tensor_from_entries(3, 2, {(0, 1, 0): 1.0, (0, 1, 1): 2.0})  # pair (1,2) all-zero
        labels = random_clustering(np.random.default_rng(0), 3, 2) if mode.needs_labels else None
        params = random_params(rng, mode, 2, 2)
        ev = similarity_gradient(x, labels, params)
        for p in range(params.n_params):
            assert ev.coordinate(p)[1, 2] == 0.0
            assert ev.coordinate(p)[2, 1] == 0.0

    @pytest.mark.parametrize("mode", ALL_MODES)
    @pytest.mark.parametrize("seed", [5, 6])
    def test_matches_central_differences(self, mode, seed):
        rng = np.random.default_rng(seed)
        n, K, F = 6, 3, 3
        x = random_feature_tensor(rng, n, F)
        labels = random_clustering(rng, n, K) if mode.needs_labels else None
        params = random_params(rng, mode, K, F)
        ev = similarity_gradient(x, labels, params)
        vec = params.to_vector()
        h = 1e-6
        for p in range(params.n_params):
            up, down = vec.copy(), vec.copy()
            up[p] += h
            down[p] -= h
            fd = (
                build_similarity(x, labels, params.replace_vector(up)).values
                - build_similarity(x, labels, params.replace_vector(down)).values
            ) / (2 * h)
            analytic = ev.coordinate(p)
            mask = np.abs(analytic) > 1e-10
            if mask.any():
                rel = np.abs(analytic[mask] - fd[mask]) / np.abs(analytic[mask])
                assert rel.max() <= 1e-6

    @pytest.mark.parametrize("mode", ALL_MODES)
    def test_contract_agrees_with_coordinates(self, rng, mode):
        n, K, F = 7, 2, 2
        x = random_feature_tensor(rng, n, F)
        labels = random_clustering(rng, n, K) if mode.needs_labels else None
        params = random_params(rng, mode, K, F)
        ev = similarity_gradient(x, labels, params)
        g = rng.normal(size=(n, n))
        expected = np.array([(g * ev.coordinate(p)).sum() for p in range(params.n_params)])
        np.testing.assert_allclose(ev.contract(g), expected, atol=1e-12)
