"""
重み付きEMアルゴリズムのテスト
"""
import numpy as np
import pytest
import scipy.stats

from core.errors import ConfigurationError, DegenerateComponent, InsufficientPoints, NoEffectiveSamples
from em.weighted_em import (
    EmConfig,
    EmOutcome,
    EmStatus,
    TooManyAborts,
    em_fit,
    em_fit_multistart,
    em_sweep,
    initialize_params,
    responsibilities,
)
from estimator.cross_entropy import cross_entropy_estimate
from mixture.gmm import GmmParams
from utils.rng_utils import make_generator


def clusters(rng, centers, n_per_cluster, scale=1.0):
    return np.vstack([c + scale * rng.standard_normal((n_per_cluster, 2)) for c in centers])


@pytest.fixture
def two_cluster_store(weighted_store):
    rng = np.random.default_rng(30)
    points = clusters(rng, [np.array([-3.0, 0.0]), np.array([3.0, 0.0])], 150)
    weights = rng.uniform(0.5, 1.5, size=points.shape[0])
    # 重み0の点は更新に寄与しない
    noise = rng.uniform(-20.0, 20.0, size=(100, 2))
    return weighted_store([(np.vstack([points, noise]), np.concatenate([weights, np.zeros(100)]))])


class TestEmConfig:
    def test_defaults(self):
        config = EmConfig()
        assert (config.max_sweeps, config.rel_improvement_threshold) == (10, 0.01)
        assert (config.condition_abort, config.n_restarts, config.abort_limit) == (1e5, 10, 5)

    def test_rejects_non_positive(self):
        with pytest.raises(ConfigurationError):
            EmConfig(max_sweeps=0)

    def test_abort_limit_bounded_by_restarts(self):
        with pytest.raises(ConfigurationError):
            EmConfig(n_restarts=3, abort_limit=4)


class TestResponsibilities:
    def test_rows_sum_to_one(self):
        theta = GmmParams.from_arrays([0.5, 0.5], [[-1.0, 0.0], [1.0, 0.0]], [np.eye(2)] * 2)
        gamma = responsibilities(theta, np.random.default_rng(0).standard_normal((40, 2)))
        np.testing.assert_allclose(gamma.sum(axis=1), 1.0, rtol=1e-14)

    def test_far_point_has_no_underflow_problem(self):
        theta = GmmParams.from_arrays([0.5, 0.5], [[-1.0, 0.0], [1.0, 0.0]], [np.eye(2)] * 2)
        gamma = responsibilities(theta, np.array([500.0, 0.0]))
        np.testing.assert_allclose(gamma, [0.0, 1.0], atol=1e-12)


class TestEmSweep:
    def test_single_component_is_weighted_moments(self, weighted_store):
        rng = np.random.default_rng(4)
        points = rng.standard_normal((60, 2)) @ np.array([[2.0, 0.0], [0.5, 1.0]])
        weights = rng.exponential(size=60)
        weights[::5] = 0.0
        store = weighted_store([(points, weights)])
        stored = store.batch(0).weights
        theta = GmmParams.from_arrays([1.0], [[5.0, 5.0]], [np.eye(2)])

        updated = em_sweep(store, range(0, 1), theta)

        mean = stored @ points / stored.sum()
        diff = points - mean
        cov = (diff * stored[:, None]).T @ diff / stored.sum()
        np.testing.assert_allclose(updated.means[0], mean, rtol=1e-12)
        np.testing.assert_allclose(updated.covs[0].matrix, cov, rtol=1e-10)
        assert updated.weights[0] == 1.0

    def test_zero_weight_points_do_not_contribute(self, weighted_store):
        rng = np.random.default_rng(5)
        points = rng.standard_normal((50, 2))
        weights = rng.uniform(0.5, 2.0, size=50)
        theta = GmmParams.from_arrays([0.5, 0.5], [[-1.0, 0.0], [1.0, 0.0]], [np.eye(2)] * 2)
        plain = weighted_store([(points, weights)])
        padded = weighted_store([(np.vstack([points, 50.0 + points]), np.concatenate([weights, np.zeros(50)]))])
        a = em_sweep(plain, range(0, 1), theta)
        b = em_sweep(padded, range(0, 1), theta)
        np.testing.assert_allclose(a.means, b.means, rtol=1e-12)
        np.testing.assert_allclose(a.weights, b.weights, rtol=1e-12)

    def test_uses_every_batch_in_range(self, weighted_store):
        rng = np.random.default_rng(6)
        first, second = rng.standard_normal((30, 2)), 4.0 + rng.standard_normal((30, 2))
        store = weighted_store([(first, np.ones(30)), (second, np.ones(30))])
        theta = GmmParams.from_arrays([1.0], [[0.0, 0.0]], [np.eye(2)])
        updated = em_sweep(store, range(0, 2), theta)
        np.testing.assert_allclose(updated.means[0], np.vstack([first, second]).mean(axis=0), rtol=1e-12)

    def test_no_effective_samples(self, weighted_store):
        store = weighted_store([(np.ones((5, 2)), np.zeros(5))])
        theta = GmmParams.from_arrays([1.0], [[0.0, 0.0]], [np.eye(2)])
        with pytest.raises(NoEffectiveSamples):
            em_sweep(store, range(0, 1), theta)

    def test_vanished_component(self, two_cluster_store):
        theta = GmmParams.from_arrays([0.5, 0.5], [[0.0, 0.0], [1000.0, 1000.0]], [np.eye(2)] * 2)
        with pytest.raises(DegenerateComponent) as e:
            em_sweep(two_cluster_store, range(0, 1), theta)
        assert e.value.component == 1

    def test_freeze_keeps_vanished_component(self, two_cluster_store):
        theta = GmmParams.from_arrays([0.5, 0.5], [[0.0, 0.0], [1000.0, 1000.0]], [np.eye(2)] * 2)
        updated = em_sweep(two_cluster_store, range(0, 1), theta, freeze_degenerate=True)
        np.testing.assert_array_equal(updated.means[1], [1000.0, 1000.0])
        assert updated.covs[1] == theta.covs[1]
        assert updated.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_objective_never_increases(self, two_cluster_store):
        theta = GmmParams.from_arrays([0.5, 0.5], [[0.0, 3.0], [0.5, -3.0]], [4.0 * np.eye(2)] * 2)
        previous = cross_entropy_estimate(two_cluster_store, theta, range(0, 1))
        for _ in range(15):
            theta = em_sweep(two_cluster_store, range(0, 1), theta)
            current = cross_entropy_estimate(two_cluster_store, theta, range(0, 1))
            assert current <= previous + 1e-12 * abs(previous)
            previous = current

    def test_objective_never_increases_on_random_instances(self, weighted_store):
        for seed in range(100):
            rng = np.random.default_rng(100 + seed)
            points = rng.standard_normal((60, 2)) * rng.uniform(0.5, 3.0, size=2) + rng.uniform(-2.0, 2.0, size=2)
            weights = rng.uniform(0.1, 2.0, size=60)
            weights[rng.uniform(size=60) < 0.2] = 0.0
            store = weighted_store([(points, weights)])
            theta = initialize_params(store, range(0, 1), 1 + seed % 3, make_generator(seed))
            previous = cross_entropy_estimate(store, theta, range(0, 1))
            for _ in range(5):
                theta = em_sweep(store, range(0, 1), theta)
                current = cross_entropy_estimate(store, theta, range(0, 1))
                assert current <= previous + 1e-10 * abs(previous), f"seed={seed}"
                previous = current

    def test_constant_weights_match_unweighted_em(self, weighted_store):
        rng = np.random.default_rng(9)
        points = clusters(rng, [np.array([-2.0, 0.0]), np.array([2.0, 1.0])], 40)
        store = weighted_store([(points, np.full(80, 2.5))])
        theta = GmmParams.from_arrays(
            [0.4, 0.6], [[-1.0, 0.0], [1.0, 0.0]], [np.eye(2), np.array([[2.0, 0.3], [0.3, 1.0]])]
        )

        updated = em_sweep(store, range(0, 1), theta)

        # 重みなしEMの更新式
        density = np.column_stack(
            [a * scipy.stats.multivariate_normal(m, c.matrix).pdf(points) for a, m, c in theta.components()]
        )
        gamma = density / density.sum(axis=1, keepdims=True)
        counts = gamma.sum(axis=0)
        means = gamma.T @ points / counts[:, None]
        np.testing.assert_allclose(updated.weights, counts / 80, rtol=1e-12)
        np.testing.assert_allclose(updated.means, means, rtol=1e-12, atol=1e-12)
        for j in range(2):
            diff = points - means[j]
            cov = (gamma[:, j, None] * diff).T @ diff / counts[j]
            np.testing.assert_allclose(updated.covs[j].matrix, cov, rtol=1e-12, atol=1e-12)


class TestEmFit:
    def test_separates_clusters(self, two_cluster_store):
        theta = GmmParams.from_arrays([0.5, 0.5], [[-1.0, 1.0], [1.0, -1.0]], [9.0 * np.eye(2)] * 2)
        outcome = em_fit(two_cluster_store, range(0, 1), theta, EmConfig(max_sweeps=100, rel_improvement_threshold=1e-10))
        assert not outcome.aborted
        means = outcome.params.means[np.argsort(outcome.params.means[:, 0])]
        np.testing.assert_allclose(means, [[-3.0, 0.0], [3.0, 0.0]], atol=0.4)

    def test_converged_params_are_a_fixed_point(self, two_cluster_store):
        theta = GmmParams.from_arrays([0.5, 0.5], [[-1.0, 1.0], [1.0, -1.0]], [9.0 * np.eye(2)] * 2)
        outcome = em_fit(two_cluster_store, range(0, 1), theta, EmConfig(max_sweeps=500, rel_improvement_threshold=1e-13))
        again = em_sweep(two_cluster_store, range(0, 1), outcome.params)
        np.testing.assert_allclose(again.means, outcome.params.means, atol=1e-5)
        np.testing.assert_allclose(again.weights, outcome.params.weights, atol=1e-6)

    def test_single_component_converges_to_weighted_moments(self, two_cluster_store):
        theta = GmmParams.from_arrays([1.0], [[10.0, -10.0]], [np.eye(2)])
        outcome = em_fit(two_cluster_store, range(0, 1), theta, EmConfig())
        assert outcome.status is EmStatus.CONVERGED
        assert outcome.sweeps_used <= 2

        points, weights = two_cluster_store.gather(range(0, 1))
        mean = weights @ points / weights.sum()
        diff = points - mean
        cov = (diff * weights[:, None]).T @ diff / weights.sum()
        np.testing.assert_allclose(outcome.params.means[0], mean, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(outcome.params.covs[0].matrix, cov, rtol=1e-10, atol=1e-12)

        # 閉形式の解は更新式の不動点
        again = em_sweep(two_cluster_store, range(0, 1), outcome.params)
        np.testing.assert_allclose(again.means, outcome.params.means, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(again.covs[0].matrix, outcome.params.covs[0].matrix, rtol=1e-10, atol=1e-12)

    def test_converged_means_are_stationary(self, two_cluster_store):
        theta = GmmParams.from_arrays([0.5, 0.5], [[-1.0, 1.0], [1.0, -1.0]], [9.0 * np.eye(2)] * 2)
        config = EmConfig(max_sweeps=500, rel_improvement_threshold=1e-10)
        outcome = em_fit(two_cluster_store, range(0, 1), theta, config)
        assert outcome.status is EmStatus.CONVERGED
        params = outcome.params

        def objective(means):
            return cross_entropy_estimate(
                two_cluster_store, GmmParams(params.weights, means, params.covs), range(0, 1)
            )

        # 相対刻み 1e-5 の中心差分
        gradient = []
        for j in range(params.k):
            for i in range(params.p):
                h = 1e-5 * max(1.0, abs(params.means[j, i]))
                plus, minus = params.means.copy(), params.means.copy()
                plus[j, i] += h
                minus[j, i] -= h
                gradient.append((objective(plus) - objective(minus)) / (2.0 * h))
        assert np.linalg.norm(gradient) <= 1e-3 * abs(outcome.objective)

    def test_sweep_budget(self, two_cluster_store):
        theta = GmmParams.from_arrays([0.5, 0.5], [[5.0, 5.0], [-5.0, 5.0]], [np.eye(2)] * 2)
        outcome = em_fit(two_cluster_store, range(0, 1), theta, EmConfig(max_sweeps=1, rel_improvement_threshold=1e-300))
        assert outcome.status is EmStatus.MAX_SWEEPS
        assert outcome.sweeps_used == 1

    def test_stops_on_small_improvement(self, two_cluster_store):
        theta = GmmParams.from_arrays([0.5, 0.5], [[-1.0, 1.0], [1.0, -1.0]], [9.0 * np.eye(2)] * 2)
        outcome = em_fit(two_cluster_store, range(0, 1), theta, EmConfig())
        assert outcome.sweeps_used <= 10
        assert outcome.status in (EmStatus.CONVERGED, EmStatus.MAX_SWEEPS)
        assert outcome.objective == pytest.approx(
            cross_entropy_estimate(two_cluster_store, outcome.params, range(0, 1)), rel=1e-12
        )

    def test_aborts_on_ill_conditioned_covariance(self, weighted_store):
        # 正の重みの点が2つだけなので更新後の共分散は階数1になる
        rng = np.random.default_rng(7)
        points = np.vstack([[[0.0, 0.0], [1.0, 2.0]], rng.standard_normal((20, 2))])
        store = weighted_store([(points, np.concatenate([[1.0, 1.0], np.zeros(20)]))])
        theta = GmmParams.from_arrays([0.5, 0.5], [[0.0, 0.0], [1.0, 2.0]], [np.eye(2)] * 2)
        outcome = em_fit(store, range(0, 1), theta, EmConfig())
        assert outcome.aborted
        assert outcome.params is None


class TestInitializeParams:
    def test_means_from_positive_points(self, two_cluster_store):
        theta = initialize_params(two_cluster_store, range(0, 1), 5, make_generator(0))
        points, weights = two_cluster_store.gather(range(0, 1))
        positive = {tuple(x) for x in points[weights > 0.0]}
        assert all(tuple(m) in positive for m in theta.means)
        assert len({tuple(m) for m in theta.means}) == 5
        np.testing.assert_allclose(theta.weights, 0.2)

    def test_falls_back_to_zero_weight_points(self, weighted_store):
        points = np.arange(20.0).reshape(10, 2)
        store = weighted_store([(points, [1.0, 1.0] + [0.0] * 8)])
        theta = initialize_params(store, range(0, 1), 4, make_generator(1))
        means = {tuple(m) for m in theta.means}
        assert {(0.0, 1.0), (2.0, 3.0)} <= means
        assert len(means) == 4

    def test_covariance_scale(self, two_cluster_store):
        points, _ = two_cluster_store.gather(range(0, 1))
        theta = initialize_params(two_cluster_store, range(0, 1), 3, make_generator(2))
        expected = 3.0 / 2.0 * np.trace(np.cov(points, rowvar=False))
        for cov in theta.covs:
            np.testing.assert_allclose(cov.matrix, expected * np.eye(2), rtol=1e-12)

    def test_insufficient_points(self, weighted_store):
        store = weighted_store([(np.arange(6.0).reshape(3, 2), [1.0, 1.0, 1.0])])
        with pytest.raises(InsufficientPoints):
            initialize_params(store, range(0, 1), 4, make_generator(0))

    def test_zero_spread(self, weighted_store):
        store = weighted_store([(np.ones((5, 2)), np.ones(5))])
        with pytest.raises(DegenerateComponent):
            initialize_params(store, range(0, 1), 2, make_generator(0))


class TestEmFitMultistart:
    def test_picks_lowest_objective(self, two_cluster_store):
        outcome = em_fit_multistart(two_cluster_store, range(0, 1), 2, EmConfig(), make_generator(3))
        assert isinstance(outcome, EmOutcome)
        assert len(outcome.restarts) == 10
        completed = [o.objective for o in outcome.restarts if not o.aborted]
        assert outcome.objective == min(completed)

    def test_deterministic_across_worker_counts(self, two_cluster_store):
        serial = em_fit_multistart(two_cluster_store, range(0, 1), 3, EmConfig(workers=1), make_generator(4))
        threaded = em_fit_multistart(two_cluster_store, range(0, 1), 3, EmConfig(workers=4), make_generator(4))
        assert serial.restart == threaded.restart
        assert serial.objective == threaded.objective
        assert serial.params == threaded.params

    def test_too_many_aborts(self, weighted_store):
        rng = np.random.default_rng(8)
        points = np.vstack([[[0.0, 0.0], [1.0, 2.0]], rng.standard_normal((20, 2))])
        store = weighted_store([(points, np.concatenate([[1.0, 1.0], np.zeros(20)]))])
        outcome = em_fit_multistart(store, range(0, 1), 2, EmConfig(), make_generator(5))
        assert isinstance(outcome, TooManyAborts)
        assert outcome.n_aborted >= 5
        assert outcome.n_restarts == 10
