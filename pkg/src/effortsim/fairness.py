"""Effort-based unfairness measures and residual-difference baselines.

All three effort measures scan, for every individual, the candidate
profiles present in the supplied population (the same data whose quantile
tables define effort), so the expensive pairwise effort/reward matrices
are computed once per (model, population) pair and shared across measures
and grid sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import Population
from .effort import EffortEngine, EffortParams, benefit_value, risk_adjusted

BOUNDED_EFFORT = "bounded_effort"
THRESHOLD_REWARD = "threshold_reward"
EFFORT_REWARD = "effort_reward"
POSITIVE_RESIDUAL = "positive_residual"
NEGATIVE_RESIDUAL = "negative_residual"


@dataclass(frozen=True)
class UnfairnessReport:
    measure: str
    per_group_value: dict
    disparity: float | None
    delta: float | None = None
    feasibility: dict | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "measure": self.measure,
            "per_group_value": self.per_group_value,
            "disparity": self.disparity,
        }
        if self.delta is not None:
            out["delta"] = self.delta
        if self.feasibility is not None:
            out["feasibility"] = self.feasibility
        if self.metadata:
            out["metadata"] = self.metadata
        return out


@dataclass(frozen=True)
class DeltaCurve:
    measure: str
    deltas: tuple
    per_group_values: dict
    per_group_feasibility: dict | None = None

    def rows(self) -> list[tuple]:
        """(delta, group, value) triples for CSV emission."""
        out = []
        for gi, (g, vals) in enumerate(sorted(self.per_group_values.items())):
            for d, v in zip(self.deltas, vals):
                out.append((d, g, v))
        return out


def _disparity(values: dict) -> float | None:
    present = [v for v in values.values() if v is not None]
    if len(present) < len(values) or not present:
        return None
    if len(present) == 1:
        return 0.0
    return float(max(present) - min(present))


class FairnessAudit:
    """Pairwise effort/reward matrices for one model over one population."""

    def __init__(self, h, pop: Population, params: EffortParams, benefit: str):
        self.pop = pop
        self.params = params
        self.benefit = benefit
        engine = EffortEngine(pop, params)
        self.efforts = engine.pairwise_effort(pop)  # row i -> candidate j
        preds = h.predict(pop)
        self.benefits = np.asarray(
            risk_adjusted(benefit_value(benefit, pop.y, preds), params.alpha), dtype=np.float64
        )
        self.rewards = self.benefits[None, :] - self.benefits[:, None]
        self._meta = {"candidate_set": "population", "benefit": benefit, "alpha": params.alpha}

    def _group_means(self, values: np.ndarray) -> dict:
        return {
            g: float(np.mean(values[self.pop.group_rows(g)])) for g in self.pop.group_names
        }

    def bounded_effort(self, delta: float) -> UnfairnessReport:
        """Best reachable reward per individual under an effort budget.

        Individuals with no candidate inside the budget stay put and score
        zero reward.
        """
        if delta < 0:
            raise ValueError(f"effort budget must be >= 0, got {delta}")
        # Infinite efforts mark unreachable candidates; no budget covers them.
        feasible = (self.efforts <= delta) & np.isfinite(self.efforts)
        best = np.where(feasible, self.rewards, -np.inf).max(axis=1)
        best = np.where(feasible.any(axis=1), best, 0.0)
        values = self._group_means(best)
        return UnfairnessReport(
            measure=BOUNDED_EFFORT,
            per_group_value=values,
            disparity=_disparity(values),
            delta=float(delta),
            metadata=dict(self._meta, infeasible="stay_put_zero_reward"),
        )

    def threshold_reward(self, delta: float) -> UnfairnessReport:
        """Least effort per individual to reach at least ``delta`` reward.

        Individuals with no finite-effort candidate at that reward level
        are excluded from the group mean and reported via ``feasibility``.
        """
        feasible = (self.rewards >= delta) & np.isfinite(self.efforts)
        min_effort = np.where(feasible, self.efforts, np.inf).min(axis=1)
        has_any = feasible.any(axis=1)
        values: dict = {}
        feas: dict = {}
        for g in self.pop.group_names:
            rows = self.pop.group_rows(g)
            ok = has_any[rows]
            feas[g] = float(np.mean(ok))
            values[g] = float(np.mean(min_effort[rows][ok])) if ok.any() else None
        return UnfairnessReport(
            measure=THRESHOLD_REWARD,
            per_group_value=values,
            disparity=_disparity(values),
            delta=float(delta),
            feasibility=feas,
            metadata=dict(self._meta, infeasible="excluded_from_mean"),
        )

    def effort_reward(self) -> UnfairnessReport:
        """Best achievable utility per individual, floored at staying put."""
        best = np.maximum(self.rewards - self.efforts, -np.inf).max(axis=1)
        best = np.maximum(best, 0.0)
        values = self._group_means(best)
        return UnfairnessReport(
            measure=EFFORT_REWARD,
            per_group_value=values,
            disparity=_disparity(values),
            metadata=dict(self._meta, floor="stay_put_zero_utility"),
        )

    def default_grid(self, measure: str, points: int = 20) -> tuple:
        """Evenly spaced budgets/thresholds spanning the observed pairwise range."""
        if points < 2:
            raise ValueError("grid needs at least 2 points")
        if measure == BOUNDED_EFFORT:
            finite = self.efforts[np.isfinite(self.efforts)]
            hi = float(finite.max()) if finite.size else 0.0
        elif measure == THRESHOLD_REWARD:
            hi = float(max(self.rewards.max(), 0.0))
        else:
            raise ValueError(f"no delta grid for measure {measure!r}")
        return tuple(np.linspace(0.0, hi, points).tolist())

    def sweep(self, measure: str, grid: Sequence[float]) -> DeltaCurve:
        grid = tuple(float(d) for d in grid)
        if list(grid) != sorted(grid):
            raise ValueError("delta grid must be sorted ascending")
        values: dict = {g: [] for g in self.pop.group_names}
        feas: dict = {g: [] for g in self.pop.group_names}
        for d in grid:
            if measure == BOUNDED_EFFORT:
                rep = self.bounded_effort(d)
            elif measure == THRESHOLD_REWARD:
                rep = self.threshold_reward(d)
            else:
                raise ValueError(f"cannot sweep measure {measure!r}")
            for g in self.pop.group_names:
                values[g].append(rep.per_group_value[g])
                feas[g].append(rep.feasibility[g] if rep.feasibility else 1.0)
        return DeltaCurve(
            measure=measure,
            deltas=grid,
            per_group_values=values,
            per_group_feasibility=feas if measure == THRESHOLD_REWARD else None,
        )


def bounded_effort(h, pop, params, benefit, delta) -> UnfairnessReport:
    return FairnessAudit(h, pop, params, benefit).bounded_effort(delta)


def threshold_reward(h, pop, params, benefit, delta) -> UnfairnessReport:
    return FairnessAudit(h, pop, params, benefit).threshold_reward(delta)


def effort_reward(h, pop, params, benefit) -> UnfairnessReport:
    return FairnessAudit(h, pop, params, benefit).effort_reward()


def sweep_delta(measure, h, pop, params, benefit, grid) -> DeltaCurve:
    return FairnessAudit(h, pop, params, benefit).sweep(measure, grid)


def residual_differences(h, pop: Population) -> tuple[UnfairnessReport, UnfairnessReport]:
    """Mean positive residual and mean negative residual gaps across groups.

    A group's value is absent when it has no member on the relevant side
    of the residual; the disparity is then absent too.
    """
    resid = h.predict(pop) - pop.y
    pos_values: dict = {}
    neg_values: dict = {}
    for g in pop.group_names:
        r = resid[pop.group_rows(g)]
        n_pos = int(np.sum(r > 0))
        n_neg = int(np.sum(r < 0))
        pos_values[g] = float(np.sum(np.maximum(r, 0.0)) / n_pos) if n_pos else None
        neg_values[g] = float(np.sum(np.maximum(-r, 0.0)) / n_neg) if n_neg else None
    pos = UnfairnessReport(
        measure=POSITIVE_RESIDUAL, per_group_value=pos_values, disparity=_disparity(pos_values)
    )
    neg = UnfairnessReport(
        measure=NEGATIVE_RESIDUAL, per_group_value=neg_values, disparity=_disparity(neg_values)
    )
    return pos, neg
