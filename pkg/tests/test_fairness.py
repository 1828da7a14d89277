from __future__ import annotations

import math

import numpy as np
import pytest

import oracles
from conftest import single_group_pop
from effortsim.dataset import Feature, FeatureKind, FeatureSchema, Population
from effortsim.effort import EffortParams
from effortsim.fairness import (
    BOUNDED_EFFORT,
    THRESHOLD_REWARD,
    FairnessAudit,
    bounded_effort,
    effort_reward,
    residual_differences,
    sweep_delta,
    threshold_reward,
)
from effortsim.models import LinearPredictor, fit_tree
from instances import random_instance


def _skill_model(pop, weight=1.0, intercept=0.0):
    w = np.zeros(pop.schema.size)
    w[pop.schema.index("skill")] = weight
    return LinearPredictor(pop.schema.names, w, intercept)


def _two_group_skill_pop():
    schema = FeatureSchema(
        features=(
            Feature("grp", FeatureKind("immutable", levels=("g1", "g2")), mutable=False),
            Feature("skill", FeatureKind("numerical_monotone", direction="increasing"), mutable=True),
        ),
        sensitive="grp",
        label="y",
    )
    X = np.array([[0, 1], [0, 3], [1, 2], [1, 4]], dtype=float)
    y = np.zeros(4)
    return Population(schema, X, y, ["g1", "g1", "g2", "g2"])


class TestBoundedEffort:
    def test_zero_budget_with_base_cost_means_nobody_moves(self):
        pop = _two_group_skill_pop()
        h = _skill_model(pop)
        rep = bounded_effort(h, pop, EffortParams(base_cost=0.1), "predicted", 0.0)
        assert rep.per_group_value == {"g1": 0.0, "g2": 0.0}
        assert rep.disparity == 0.0

    def test_unbounded_budget_reaches_best_candidate(self):
        pop = _two_group_skill_pop()
        h = _skill_model(pop)
        params = EffortParams()
        rep = bounded_effort(h, pop, params, "predicted", math.inf)
        want = oracles.bounded_effort(h, pop, params, "predicted", math.inf)
        assert rep.per_group_value == pytest.approx(want, abs=1e-12)

    def test_matches_bruteforce_on_random_instances(self):
        for seed in range(6):
            pop, params, h, benefit = random_instance(seed)
            audit = FairnessAudit(h, pop, params, benefit)
            finite = audit.efforts[np.isfinite(audit.efforts)]
            for delta in (0.0, float(np.median(finite)), float(finite.max())):
                got = audit.bounded_effort(delta).per_group_value
                want = oracles.bounded_effort(h, pop, params, benefit, delta)
                for g in want:
                    assert got[g] == pytest.approx(want[g], abs=1e-10)

    def test_negative_budget_rejected(self):
        pop = _two_group_skill_pop()
        with pytest.raises(ValueError):
            bounded_effort(_skill_model(pop), pop, EffortParams(), "predicted", -0.5)


class TestThresholdReward:
    def test_self_candidate_makes_zero_threshold_free(self):
        pop = _two_group_skill_pop()
        h = _skill_model(pop)
        rep = threshold_reward(h, pop, EffortParams(), "predicted", 0.0)
        assert rep.per_group_value == {"g1": 0.0, "g2": 0.0}
        assert rep.feasibility == {"g1": 1.0, "g2": 1.0}

    def test_unreachable_threshold_reports_absent(self):
        pop = _two_group_skill_pop()
        h = _skill_model(pop)
        rep = threshold_reward(h, pop, EffortParams(), "predicted", 1e9)
        assert rep.per_group_value == {"g1": None, "g2": None}
        assert rep.feasibility == {"g1": 0.0, "g2": 0.0}
        assert rep.disparity is None

    def test_matches_bruteforce_on_random_instances(self):
        for seed in range(6, 12):
            pop, params, h, benefit = random_instance(seed)
            audit = FairnessAudit(h, pop, params, benefit)
            hi = float(audit.rewards.max())
            for delta in (0.0, hi / 2, hi):
                got = audit.threshold_reward(delta)
                want_vals, want_feas = oracles.threshold_reward(h, pop, params, benefit, delta)
                for g in want_vals:
                    if want_vals[g] is None:
                        assert got.per_group_value[g] is None
                    else:
                        assert got.per_group_value[g] == pytest.approx(want_vals[g], abs=1e-10)
                    assert got.feasibility[g] == pytest.approx(want_feas[g], abs=1e-12)


class TestEffortReward:
    def test_constant_predictor_floors_at_stay_put(self):
        pop = _two_group_skill_pop()
        h = _skill_model(pop, weight=0.0, intercept=5.0)
        rep = effort_reward(h, pop, EffortParams(), "predicted")
        assert rep.per_group_value == {"g1": 0.0, "g2": 0.0}
        assert rep.disparity == 0.0

    def test_matches_bruteforce_on_random_instances(self):
        for seed in range(12, 18):
            pop, params, h, benefit = random_instance(seed)
            got = effort_reward(h, pop, params, benefit).per_group_value
            want = oracles.effort_reward(h, pop, params, benefit)
            for g in want:
                assert got[g] == pytest.approx(want[g], abs=1e-10)

    def test_dominates_every_candidate(self):
        pop, params, h, benefit = random_instance(18)
        audit = FairnessAudit(h, pop, params, benefit)
        rep = audit.effort_reward()
        utilities = audit.rewards - audit.efforts
        best = np.maximum(np.max(utilities, axis=1), 0.0)
        for i in range(pop.size):
            assert best[i] + 1e-12 >= np.max(utilities[i])
            assert best[i] >= 0.0

    def test_single_group_disparity_zero(self):
        pop = single_group_pop([1, 2, 3, 4])
        h = _skill_model(pop)
        assert effort_reward(h, pop, EffortParams(), "predicted").disparity == 0.0

    def test_permutation_invariance(self):
        pop, params, h, benefit = random_instance(19)
        perm = np.random.default_rng(0).permutation(pop.size)
        shuffled = Population(
            pop.schema, pop.X[perm], pop.y[perm], [pop.groups[i] for i in perm]
        )
        a = effort_reward(h, pop, params, benefit).per_group_value
        b = effort_reward(h, shuffled, params, benefit).per_group_value
        assert a == pytest.approx(b, abs=1e-12)


class TestResidualDifferences:
    def test_perfect_predictor_absent(self):
        pop = single_group_pop([1, 2, 3], labels=[1, 2, 3])
        h = _skill_model(pop)
        pos, neg = residual_differences(h, pop)
        assert pos.per_group_value == {"g1": None}
        assert neg.per_group_value == {"g1": None}
        assert pos.disparity is None and neg.disparity is None

    def test_hand_worked_example(self):
        # group g1 residuals {+2, -1}; group g2 residuals {+1, +1}
        pop = _two_group_skill_pop()
        X = pop.X.copy()
        X[:, 1] = [2.0, -1.0, 1.0, 1.0]
        pop = Population(pop.schema, X, np.zeros(4), list(pop.groups))
        h = _skill_model(pop)
        pos, neg = residual_differences(h, pop)
        assert pos.per_group_value == {"g1": 2.0, "g2": 1.0}
        assert pos.disparity == pytest.approx(1.0)
        assert neg.per_group_value["g1"] == pytest.approx(1.0)
        assert neg.per_group_value["g2"] is None
        assert neg.disparity is None


class TestSweep:
    def test_grid_must_be_sorted(self):
        pop, params, h, benefit = random_instance(20)
        with pytest.raises(ValueError):
            sweep_delta(BOUNDED_EFFORT, h, pop, params, benefit, [1.0, 0.5])

    def test_curves_nondecreasing_and_match_pointwise(self):
        for seed in (23, 24):
            pop, params, h, benefit = random_instance(seed)
            audit = FairnessAudit(h, pop, params, benefit)
            grid = audit.default_grid(BOUNDED_EFFORT, 8)
            curve = audit.sweep(BOUNDED_EFFORT, grid)
            for g, vals in curve.per_group_values.items():
                assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
                for d, v in zip(curve.deltas, vals):
                    assert v == audit.bounded_effort(d).per_group_value[g]
            tgrid = audit.default_grid(THRESHOLD_REWARD, 8)
            tcurve = audit.sweep(THRESHOLD_REWARD, tgrid)
            for g, vals in tcurve.per_group_values.items():
                present = [v for v in vals if v is not None]
                assert all(a <= b + 1e-12 for a, b in zip(present, present[1:]))

    def test_endpoints_match_closed_forms(self):
        pop, params, h, benefit = random_instance(25)
        audit = FairnessAudit(h, pop, params, benefit)
        grid = audit.default_grid(BOUNDED_EFFORT, 6)
        curve = audit.sweep(BOUNDED_EFFORT, grid)
        lo = audit.bounded_effort(0.0).per_group_value
        hi = audit.bounded_effort(math.inf).per_group_value
        for g in lo:
            assert curve.per_group_values[g][0] == lo[g]
            # the top of the default grid admits every finite-effort candidate
            assert curve.per_group_values[g][-1] == hi[g]

    def test_rows_layout(self):
        pop, params, h, benefit = random_instance(26)
        curve = FairnessAudit(h, pop, params, benefit).sweep(BOUNDED_EFFORT, [0.0, 0.1])
        rows = curve.rows()
        assert len(rows) == 2 * len(pop.group_names)
        assert all(len(r) == 3 for r in rows)


class TestTreePredictorIntegration:
    def test_audit_works_with_trees(self):
        pop, params, _, benefit = random_instance(27)
        h = fit_tree(pop, 3)
        got = effort_reward(h, pop, params, benefit).per_group_value
        want = oracles.effort_reward(h, pop, params, benefit)
        for g in want:
            assert got[g] == pytest.approx(want[g], abs=1e-10)
