import math

import numpy as np
import pytest

from conftest import assert_ulp_close
from gradcraft import (
    GradCraft,
    EqualWeighting,
    adjust_magnitudes,
    as_gradient_set,
    combine,
    detect_conflicts,
    project_task,
)
from gradcraft.exceptions import DegenerateGradientSetError
from gradcraft.gradients import GradientSet
from gradcraft import linalg


def random_set(rng, n_tasks=None, dim=None, spread=3):
    n_tasks = n_tasks or int(rng.integers(2, 9))
    dim = dim or int(rng.integers(2, 64))
    scales = 10.0 ** rng.uniform(-spread, spread, size=(n_tasks, 1))
    return as_gradient_set(rng.normal(size=(n_tasks, dim)) * scales)


class TestGradientSet:
    def test_requires_unique_names(self):
        with pytest.raises(ValueError, match="unique"):
            GradientSet(("a", "a"), np.ones((2, 3)))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            GradientSet(("a",), np.array([[np.inf, 1.0]]))

    def test_frozen_array(self):
        gs = as_gradient_set([[1.0, 2.0]])
        with pytest.raises(ValueError):
            gs.grads[0, 0] = 5.0

    def test_default_names(self):
        gs = as_gradient_set(np.ones((3, 2)))
        assert gs.task_names == ("task_0", "task_1", "task_2")


class TestAdjustMagnitudes:
    def test_tau_zero_is_identity_bitwise(self, rng):
        gs = random_set(rng)
        assert np.array_equal(adjust_magnitudes(gs, 0.0).grads, gs.grads)

    def test_tau_one_equalizes(self):
        out = adjust_magnitudes(as_gradient_set([[3.0, 0.0], [0.0, 1.0]]), 1.0)
        assert np.array_equal(out.grads, [[3, 0], [0, 3]])

    def test_half_blend(self):
        out = adjust_magnitudes(as_gradient_set([[3.0, 0.0], [0.0, 1.0]]), 0.5)
        assert np.array_equal(out.grads, [[3, 0], [0, 2]])
        norms = out.norms()
        assert norms.max() / norms.min() == 1.5 <= 1 / 0.5

    def test_all_zero_rejected(self):
        with pytest.raises(DegenerateGradientSetError):
            adjust_magnitudes(as_gradient_set(np.zeros((2, 3))), 0.5)

    def test_zero_rows_left_alone(self):
        gs = as_gradient_set([[0.0, 0.0], [1.0, 2.0]])
        out = adjust_magnitudes(gs, 0.7)
        assert np.array_equal(out.grads[0], [0.0, 0.0])
        assert np.array_equal(out.grads[1], [1.0, 2.0])

    def test_norm_ratio_bound(self, rng):
        for _ in range(200):
            gs = random_set(rng)
            tau = float(rng.integers(1, 11)) / 10.0
            norms = adjust_magnitudes(gs, tau).norms()
            assert norms.max() / norms.min() <= 1.0 / tau + 1e-9

    def test_direction_preserved(self, rng):
        for _ in range(50):
            gs = random_set(rng)
            out = adjust_magnitudes(gs, float(rng.random()))
            for before, after in zip(gs.grads, out.grads):
                cos = linalg.inner(before, after) / (linalg.norm(before) * linalg.norm(after))
                assert cos == pytest.approx(1.0, abs=1e-12)

    def test_scale_equivariance_power_of_two_exact(self, rng):
        gs = random_set(rng)
        for c in (0.25, 2.0, 1024.0):
            scaled = adjust_magnitudes(as_gradient_set(gs.grads * c), 0.4).grads
            assert np.array_equal(scaled, adjust_magnitudes(gs, 0.4).grads * c)

    def test_scale_equivariance_general(self, rng):
        for _ in range(50):
            gs = random_set(rng, spread=1)
            tau = float(rng.random())
            c = float(10 ** rng.uniform(-1, 1))
            a = adjust_magnitudes(as_gradient_set(gs.grads * c), tau).grads
            b = adjust_magnitudes(gs, tau).grads * c
            assert_ulp_close(a, b, ulps=4)

    def test_max_task_untouched_bitwise(self, rng):
        gs = random_set(rng)
        idx = int(np.argmax(gs.norms()))
        out = adjust_magnitudes(gs, 0.37)
        assert np.array_equal(out.grads[idx], gs.grads[idx])


class TestDetectConflicts:
    def test_orthogonal_pair(self):
        assert not detect_conflicts(as_gradient_set([[1.0, 0.0], [0.0, 1.0]])).any()

    def test_antiparallel(self):
        conf = detect_conflicts(as_gradient_set([[1.0, 0.0], [-1.0, 0.0]]))
        assert conf[0, 1] and conf[1, 0] and not conf[0, 0]

    def test_hand_pair(self):
        conf = detect_conflicts(as_gradient_set([[1.0, 1.0], [1.0, -2.0]]))
        assert conf[0, 1]

    def test_tolerance_strictness(self):
        gs = as_gradient_set([[1.0, 1.0], [1.0, -2.0]])  # inner -1
        assert detect_conflicts(gs, conflict_tol=0.5)[0, 1]
        assert not detect_conflicts(gs, conflict_tol=1.5)[0, 1]

    def test_symmetric_false_diagonal(self, rng):
        conf = detect_conflicts(random_set(rng, n_tasks=6))
        assert np.array_equal(conf, conf.T)
        assert not conf.diagonal().any()

    def test_zero_gradient_never_conflicts(self):
        gs = as_gradient_set([[0.0, 0.0], [-1.0, 0.0], [1.0, 0.0]])
        conf = detect_conflicts(gs)
        assert not conf[0].any()


class TestProjectTask:
    def test_empty_conflicts_identity(self):
        g, resid, jitter = project_task([1.0, 2.0], [], 0.5)
        assert np.array_equal(g, [1.0, 2.0])
        assert resid == 0.0 and jitter == 0.0

    def test_hand_eps_zero(self):
        g, resid, jitter = project_task([1.0, -1.0], [[0.0, 2.0]], 0.0)
        assert np.array_equal(g, [1.0, 0.0])
        assert linalg.inner(g, [0.0, 2.0]) == 0.0
        assert jitter == 0.0

    def test_hand_eps_positive(self):
        g, resid, _ = project_task([1.0, -1.0], [[0.0, 2.0]], 0.1)
        target = 0.1 * math.sqrt(2.0) * 2.0
        assert g[0] == 1.0
        assert g[1] == pytest.approx(0.1 * math.sqrt(2.0), abs=1e-15)
        assert linalg.inner(g, [0.0, 2.0]) == pytest.approx(target, abs=1e-15)
        assert resid <= 1e-12

    def test_contract_on_random_conflicting_sets(self, rng):
        checked = 0
        while checked < 200:
            gs = random_set(rng, n_tasks=int(rng.integers(3, 7)), dim=int(rng.integers(8, 64)), spread=1)
            adjusted = adjust_magnitudes(gs, 0.3)
            conflicts = detect_conflicts(adjusted)
            eps = float(10.0 ** rng.uniform(-12, -6))
            for i in range(gs.n_tasks):
                if not conflicts[i].any():
                    continue
                others = adjusted.grads[conflicts[i]]
                if np.linalg.cond(linalg.gram(others)) > 1e6:
                    continue
                out, resid, jitter = project_task(adjusted.grads[i], others, eps)
                targets = eps * linalg.norm(adjusted.grads[i]) * np.array(
                    [linalg.norm(c) for c in others]
                )
                raw = np.array([linalg.inner(c, adjusted.grads[i]) for c in others])
                scale = max(1.0, np.max(np.abs(targets)), np.max(np.abs(raw)))
                for j, other in enumerate(others):
                    assert abs(linalg.inner(other, out) - targets[j]) <= 1e-6 * scale
                if jitter == 0.0:
                    assert resid <= 1e-6 * scale
                checked += 1

    def test_monotone_epsilon(self):
        g = np.array([1.0, -1.0, 0.5])
        other = np.array([0.0, 2.0, 0.1])
        inners = []
        for eps in (0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4):
            out, _, _ = project_task(g, [other], eps)
            inners.append(linalg.inner(out, other))
        assert all(a < b for a, b in zip(inners, inners[1:]))

    def test_duplicated_conflicts_finite(self, rng):
        other = rng.normal(size=8)
        g = -other + 0.1 * rng.normal(size=8)
        out, resid, jitter = project_task(g, np.stack([other, other]), 0.0)
        assert jitter > 0.0
        assert np.all(np.isfinite(out))
        raw = abs(linalg.inner(other, g))
        assert resid <= 1e-3 * max(1.0, raw)


class TestCombine:
    def test_mean(self):
        assert np.array_equal(combine([[1.0, 0.0], [0.0, 1.0]]), [0.5, 0.5])

    def test_single(self):
        assert np.array_equal(combine([[2.0, -3.0]]), [2.0, -3.0])

    def test_cancellation(self):
        assert np.array_equal(combine([[1.0, 1.0], [-1.0, -1.0]]), [0.0, 0.0])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            combine(np.empty((0, 3)))


class TestCraftStep:
    def test_single_task_unchanged_any_tau(self):
        for tau in np.linspace(0.0, 1.0, 11):
            res = GradCraft(tau=float(tau), epsilon=0.0).craft([[1.0, 2.0, -3.0]])
            assert np.array_equal(res.combined, [1.0, 2.0, -3.0])
            assert not res.report.conflict_matrix.any()

    def test_orthogonal_equal_norms(self):
        res = GradCraft(tau=1.0, epsilon=0.0).craft([[1.0, 0.0], [0.0, 1.0]])
        assert np.array_equal(res.combined, [0.5, 0.5])
        assert not res.report.conflict_matrix.any()

    def test_worked_conflict_pair(self):
        res = GradCraft(tau=0.0, epsilon=0.0).craft([[1.0, -1.0], [0.0, 2.0]])
        assert np.array_equal(res.per_task, [[1.0, 0.0], [1.0, 1.0]])
        assert np.array_equal(res.combined, [1.0, 0.5])
        assert res.report.conflict_matrix[0, 1]
        assert res.report.per_task_conflict_counts.tolist() == [1, 1]

    def test_no_conflict_fixed_point_matches_ew_bitwise(self, rng):
        for _ in range(20):
            gs = as_gradient_set(np.abs(rng.normal(size=(4, 6))))  # positive orthant
            a = GradCraft(tau=0.0, epsilon=0.0).craft(gs)
            b = EqualWeighting().craft(gs)
            assert np.array_equal(a.combined, b.combined)

    def test_projects_against_adjusted_not_outputs(self):
        # task ordering must not matter: every task is projected against the
        # same adjusted set, so outputs are order independent
        rng = np.random.default_rng(7)
        grads = rng.normal(size=(5, 12))
        names = ("a", "b", "c", "d", "e")
        base = GradCraft(tau=0.2, epsilon=1e-8).craft(grads, names)
        perm = [4, 2, 0, 1, 3]
        permuted = GradCraft(tau=0.2, epsilon=1e-8).craft(
            grads[perm], tuple(names[i] for i in perm)
        )
        assert np.array_equal(base.combined, permuted.combined)
        for out_row, src_row in enumerate(perm):
            assert np.array_equal(permuted.per_task[out_row], base.per_task[src_row])
            assert np.array_equal(
                permuted.report.projection_residuals[out_row],
                base.report.projection_residuals[src_row],
            )

    def test_degeneration_single_conflict(self, rng):
        # with one conflict and eps 0 the global solve reduces to the
        # canonical squared-norm projection
        for _ in range(100):
            dim = int(rng.integers(2, 64))
            g0 = rng.normal(size=dim)
            g1 = -g0 + 0.3 * rng.normal(size=dim)
            if linalg.inner(g0, g1) >= 0:
                continue
            res = GradCraft(tau=0.0, epsilon=0.0).craft(np.stack([g0, g1]))
            expected = g0 - (linalg.inner(g0, g1) / linalg.inner(g1, g1)) * g1
            scale = max(1.0, float(np.max(np.abs(expected))))
            assert np.max(np.abs(res.per_task[0] - expected)) <= 1e-8 * scale

    def test_report_populated(self, rng):
        gs = random_set(rng, n_tasks=4)
        res = GradCraft(tau=0.5, epsilon=1e-9).craft(gs)
        rep = res.report
        assert rep.norms_before.shape == (4,)
        assert rep.norms_after_adjust.shape == (4,)
        assert rep.conflict_matrix.shape == (4, 4)
        assert np.array_equal(rep.conflict_matrix, rep.conflict_matrix.T)
        assert (rep.projection_residuals >= 0).all()
        assert rep.combined_norm == linalg.norm(res.combined)

    def test_antiparallel_pair_cancels(self):
        res = GradCraft(tau=0.0, epsilon=0.0).craft([[1.0, 0.0], [-1.0, 0.0]])
        assert np.array_equal(res.combined, [0.0, 0.0])
        assert np.array_equal(res.per_task, np.zeros((2, 2)))
