"""
CICによる成分数選択のテスト
"""
import collections
import logging
import math
import os

import numpy as np
import pytest

import selection.cic as cic
from benchmark.parabolic import ParabolicLimitState, make_problem
from core.errors import NoEffectiveSamples, TooManyAbortsError
from em.weighted_em import EmConfig, EmOutcome, EmStatus, TooManyAborts
from estimator.batch_store import BatchStore
from estimator.cross_entropy import cross_entropy_estimate
from mixture.gmm import GmmParams, free_param_dimension, gmm_logpdf, gmm_sample
from sampler.problem import default_initial_proposal, draw_batch
from selection.cic import (
    cic_rho_hat,
    cic_value,
    k_cap,
    moving_average_increased,
    next_k_min,
    read_trace_csv,
    select_model_order,
    write_trace_csv,
)
from utils.rng_utils import (
    PURPOSE_INITIAL_PROPOSAL,
    PURPOSE_MODEL_SELECTION,
    PURPOSE_SAMPLING,
    child_generator,
    make_generator,
)

DUMMY_PARAMS = GmmParams.from_arrays([1.0], [[0.0, 0.0]], [np.eye(2)])


def scripted_multistart(objectives, abort_from=None):
    """kごとに決まった C̄ を返す em_fit_multistart の代わり"""
    calls = []

    def fake(store, batch_range, k, config, rng):
        calls.append(k)
        if abort_from is not None and k >= abort_from:
            return TooManyAborts(k, 6, 10)
        return EmOutcome(EmStatus.CONVERGED, DUMMY_PARAMS, objectives[k], 3, restart=0)

    fake.calls = calls
    return fake


@pytest.fixture
def many_points_store(weighted_store):
    rng = np.random.default_rng(0)
    return weighted_store([(rng.standard_normal((600, 2)), np.ones(600))])


class TestHelpers:
    def test_cic_value(self):
        assert cic_value(2.0, 0.5, 10, 1000) == pytest.approx(2.005)

    def test_cic_value_rejects_empty(self):
        with pytest.raises(ValueError):
            cic_value(1.0, 1.0, 5, 0)

    def test_moving_average(self):
        assert not moving_average_increased([5.0, 4.0, 3.0, 2.0])
        assert not moving_average_increased([5.0, 4.0, 3.0, 2.0, 1.0])
        assert moving_average_increased([4.0, 3.0, 2.0, 1.0, 10.0])

    def test_k_cap(self):
        assert k_cap(1000, 2) == 50
        assert k_cap(30, 2) == 10
        assert k_cap(2, 2) == 1

    def test_next_k_min(self):
        assert [next_k_min(k) for k in (1, 2, 4, 5, 9)] == [1, 1, 1, 2, 6]

    def test_cic_rho_hat(self, weighted_store):
        store = weighted_store([(np.zeros((2, 2)), [4.0, 4.0]), (np.zeros((2, 2)), [1.0, 3.0])])
        assert cic_rho_hat(store, 1) == pytest.approx(4.0)
        assert cic_rho_hat(store, 2) == pytest.approx(2.0)
        assert cic_rho_hat(store, 1, cumulative=False) == pytest.approx(4.0)
        assert cic_rho_hat(store, 2, cumulative=False) == pytest.approx(2.0)


class TestGridSearch:
    def test_stops_when_moving_average_increases(self, many_points_store, monkeypatch):
        fake = scripted_multistart({1: 5.0, 2: 4.0, 3: 3.0, 4: 2.0, 5: 1.0, 6: 10.0, 7: 0.0})
        monkeypatch.setattr(cic, "em_fit_multistart", fake)
        trace = select_model_order(many_points_store, range(0, 1), 0.0, 1, EmConfig(), make_generator(0))
        assert [e.k for e in trace.entries] == [1, 2, 3, 4, 5, 6]
        assert trace.chosen_k == 5
        assert trace.stop_reason == "moving_average"
        assert 7 not in fake.calls

    def test_penalty_uses_free_parameter_dimension(self, many_points_store, monkeypatch):
        monkeypatch.setattr(cic, "em_fit_multistart", scripted_multistart({k: 1.0 for k in range(1, 51)}))
        trace = select_model_order(many_points_store, range(0, 1), 0.3, 1, EmConfig(), make_generator(0))
        for entry in trace.entries:
            assert entry.d == free_param_dimension(entry.k, 2)
            assert entry.cic == pytest.approx(1.0 + 0.3 * entry.d / 600)
        assert trace.chosen_k == 1

    def test_ties_go_to_smaller_k(self, many_points_store, monkeypatch):
        objectives = {1: 3.0, 2: 1.0, 3: 1.0, 4: 2.0, 5: 2.5, 6: 2.6, 7: 2.7}
        monkeypatch.setattr(cic, "em_fit_multistart", scripted_multistart(objectives))
        trace = select_model_order(many_points_store, range(0, 1), 0.0, 1, EmConfig(), make_generator(0))
        assert trace.chosen_k == 2

    def test_too_many_aborts_ends_search(self, many_points_store, monkeypatch):
        monkeypatch.setattr(cic, "em_fit_multistart", scripted_multistart({1: 2.0, 2: 1.0}, abort_from=3))
        trace = select_model_order(many_points_store, range(0, 1), 0.0, 1, EmConfig(), make_generator(0))
        assert [e.status for e in trace.entries] == ["converged", "converged", "too_many_aborts"]
        assert math.isnan(trace.entries[-1].cic)
        assert trace.chosen_k == 2
        assert trace.stop_reason == "too_many_aborts"

    def test_lowers_k_min_when_first_k_aborts(self, many_points_store, monkeypatch):
        fake = scripted_multistart({1: 2.0, 2: 1.0}, abort_from=3)
        monkeypatch.setattr(cic, "em_fit_multistart", fake)
        trace = select_model_order(many_points_store, range(0, 1), 0.0, 4, EmConfig(), make_generator(0))
        assert [e.k for e in trace.entries] == [2, 3]
        assert trace.chosen_k == 2
        # 一度計算したkは再計算しない
        assert fake.calls.count(3) == 1

    def test_abort_at_k_one_is_an_error(self, many_points_store, monkeypatch):
        monkeypatch.setattr(cic, "em_fit_multistart", scripted_multistart({}, abort_from=1))
        with pytest.raises(TooManyAbortsError) as e:
            select_model_order(many_points_store, range(0, 1), 0.0, 3, EmConfig(), make_generator(0))
        assert e.value.k == 1

    def test_cap_stops_search_with_warning(self, weighted_store, monkeypatch, caplog):
        rng = np.random.default_rng(1)
        store = weighted_store([(rng.standard_normal((40, 2)), np.r_[np.ones(9), np.zeros(31)])])
        monkeypatch.setattr(cic, "em_fit_multistart", scripted_multistart({1: 3.0, 2: 2.0, 3: 1.0}))
        with caplog.at_level(logging.WARNING):
            trace = select_model_order(store, range(0, 1), 0.0, 1, EmConfig(), make_generator(0))
        assert [e.k for e in trace.entries] == [1, 2, 3]
        assert trace.stop_reason == "cap"
        assert trace.chosen_k == 3
        assert "cap" in caplog.text

    def test_no_effective_samples(self, weighted_store):
        store = weighted_store([(np.ones((10, 2)), np.zeros(10))])
        with pytest.raises(NoEffectiveSamples):
            select_model_order(store, range(0, 1), 0.0, 1, EmConfig(), make_generator(0))


class TestGridSearchWithEm:
    def test_three_points_allow_only_one_component(self, weighted_store):
        rng = np.random.default_rng(2)
        points = np.vstack([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 5.0 + rng.standard_normal((30, 2))])
        store = weighted_store([(points, np.r_[np.ones(3), np.zeros(30)])])
        trace = select_model_order(store, range(0, 1), 0.1, 1, EmConfig(), make_generator(3))
        assert trace.chosen_k == 1
        assert [e.k for e in trace.entries] == [1]

    def test_degenerate_data_raises(self, weighted_store):
        rng = np.random.default_rng(3)
        points = np.vstack([[[0.0, 0.0], [1.0, 2.0]], rng.standard_normal((20, 2))])
        store = weighted_store([(points, np.r_[1.0, 1.0, np.zeros(20)])])
        with pytest.raises(TooManyAbortsError):
            select_model_order(store, range(0, 1), 0.1, 1, EmConfig(), make_generator(4))

    def test_separated_clusters(self, weighted_store):
        rng = np.random.default_rng(4)
        centers = [np.array([0.0, 0.0]), np.array([20.0, 0.0]), np.array([0.0, 20.0])]
        points = np.vstack([c + rng.standard_normal((200, 2)) for c in centers])
        store = weighted_store([(points, np.ones(600))])
        trace = select_model_order(store, range(0, 1), 1.0, 1, EmConfig(), make_generator(5))
        chosen = trace.chosen_entry()
        assert chosen.cic == min(e.cic for e in trace.entries if e.completed)
        assert 2 <= trace.chosen_k <= 6
        assert trace.stop_reason in ("moving_average", "too_many_aborts")

    def test_reproducible(self, weighted_store):
        rng = np.random.default_rng(5)
        store = weighted_store([(rng.standard_normal((200, 2)), rng.uniform(size=200))])
        a = select_model_order(store, range(0, 1), 0.5, 1, EmConfig(), make_generator(6))
        b = select_model_order(store, range(0, 1), 0.5, 1, EmConfig(workers=3), make_generator(6))
        assert a.rows() == b.rows()
        assert a.chosen_params == b.chosen_params


class TestTraceCsv:
    def test_written_rows_read_back(self, many_points_store, monkeypatch, tmp_path):
        monkeypatch.setattr(cic, "em_fit_multistart", scripted_multistart({1: 2.0, 2: 1.0}, abort_from=3))
        trace = select_model_order(many_points_store, range(0, 1), 0.25, 1, EmConfig(), make_generator(0), t=2)
        path = tmp_path / "trace.csv"
        text = write_trace_csv([trace], path, header_lines=["seed=0"])
        assert text.startswith("# seed=0\nt,k,d,status,cbar,rho_hat,cic,chosen\n")
        rows = read_trace_csv(path)
        assert rows == trace.rows()
        assert [r.chosen for r in rows] == [0, 1, 0]


class TestScaledTarget:
    """r = c·q（重みが定数c）のときのCIC"""

    @pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
    def test_cic_is_c_times_aic(self, weighted_store, c):
        proposal = GmmParams.from_arrays([0.5, 0.5], [[-2.0, 0.0], [2.0, 0.0]], [np.eye(2)] * 2)
        points = gmm_sample(make_generator(20), proposal, size=400)
        store = weighted_store([(points, np.full(400, c))], proposal=proposal)
        theta = GmmParams.from_arrays([0.3, 0.7], [[-1.5, 0.5], [2.5, -0.5]], [np.eye(2), 2.0 * np.eye(2)])
        d = free_param_dimension(theta.k, 2)

        rho_hat = cic_rho_hat(store, 1)
        value = cic_value(cross_entropy_estimate(store, theta, range(0, 1)), rho_hat, d, 400)
        aic = -float(np.sum(gmm_logpdf(theta, points))) + d

        assert rho_hat == pytest.approx(c, rel=1e-12)
        assert value == pytest.approx(c * aic / 400, rel=1e-12)

    def test_chosen_order_does_not_depend_on_scale(self, weighted_store):
        proposal = GmmParams.from_arrays([1.0 / 3.0] * 3, [[-4.0, 0.0], [4.0, 0.0], [0.0, 4.0]], [np.eye(2)] * 3)
        points = gmm_sample(make_generator(21), proposal, size=450)
        traces = {}
        for c in (0.5, 1.0, 3.0):
            store = weighted_store([(points, np.full(450, c))], proposal=proposal)
            traces[c] = select_model_order(store, range(0, 1), cic_rho_hat(store, 1), 1, EmConfig(), make_generator(22))

        reference = traces[1.0]
        for c, trace in traces.items():
            assert trace.chosen_k == reference.chosen_k
            assert [e.k for e in trace.entries] == [e.k for e in reference.entries]
            for entry, base in zip(trace.entries, reference.entries):
                if entry.completed:
                    assert entry.cic == pytest.approx(c * base.cic, rel=1e-9)


@pytest.mark.slow
class TestModelOrderAtFirstIteration:
    def test_chosen_order_on_parabolic_benchmark(self):
        problem = make_problem(ParabolicLimitState(b=1.5))
        config = EmConfig(workers=os.cpu_count() or 1)
        chosen = []
        for seed in range(30):
            rng = make_generator(seed)
            store = BatchStore(2)
            proposal = default_initial_proposal(2, child_generator(rng, 0, PURPOSE_INITIAL_PROPOSAL))
            draw_batch(problem, store, proposal, 1000, child_generator(rng, 1, PURPOSE_SAMPLING))
            trace = select_model_order(
                store, range(0, 1), cic_rho_hat(store, 1), 1, config, child_generator(rng, 1, PURPOSE_MODEL_SELECTION)
            )
            chosen.append(trace.chosen_k)

        counts = collections.Counter(chosen)
        mode = max(counts, key=lambda k: (counts[k], -k))
        assert 5 <= mode <= 9
        assert sum(counts[k] for k in range(5, 10)) >= 15
