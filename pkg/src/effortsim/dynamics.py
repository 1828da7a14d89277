"""One simultaneous round of role-model imitation.

Each individual scans the frozen population for the profile whose
imitation maximizes utility, where the imitation target takes the
candidate's mutable feature values and label while keeping the
individual's own non-mutable entries. Moves happen only on strictly
positive utility; everyone else stays put. Responses do not cascade:
every selection reads the original population.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Population
from .effort import (
    EffortEngine,
    EffortParams,
    UtilityBreakdown,
    ZERO_BREAKDOWN,
    benefit_value,
    risk_adjusted,
)


@dataclass(frozen=True)
class ImitationOutcome:
    individual_index: int
    role_model_index: int | None
    exerted: UtilityBreakdown
    changed: bool
    new_x: np.ndarray
    new_y: float

    def to_dict(self) -> dict:
        return {
            "individual": self.individual_index,
            "role_model": self.role_model_index,
            "reward": self.exerted.reward,
            "effort": self.exerted.effort,
            "utility": self.exerted.utility,
            "changed": self.changed,
        }


@dataclass(frozen=True)
class FocalPoint:
    vector: np.ndarray  # values in the mutable feature subspace
    count: int


@dataclass(frozen=True)
class ImpactResult:
    outcomes: list
    impacted: Population
    focal_points: list
    metadata: dict = field(default_factory=dict)


class _Selector:
    """Shared state for scanning candidates: efforts and own benefits."""

    def __init__(self, h, pop: Population, params: EffortParams, benefit: str):
        self.h = h
        self.pop = pop
        self.params = params
        self.benefit = benefit
        engine = EffortEngine(pop, params)
        # Imitation keeps non-mutable entries, so only mutable features cost.
        self.efforts = engine.pairwise_effort(pop, mutable_only=True)
        self.own_benefit = np.asarray(
            risk_adjusted(benefit_value(benefit, pop.y, h.predict(pop)), params.alpha)
        )
        self.mutable = pop.schema.mutable_mask

    def targets_for(self, i: int) -> np.ndarray:
        """(n, K) matrix of imitation targets for individual i."""
        T = self.pop.X.copy()
        T[:, ~self.mutable] = self.pop.X[i, ~self.mutable]
        return T

    def scan(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Rewards and utilities of imitating every candidate, for one row."""
        T = self.targets_for(i)
        preds = self.h.predict_rows(self.pop.schema, T)
        target_benefit = np.asarray(
            risk_adjusted(benefit_value(self.benefit, self.pop.y, preds), self.params.alpha)
        )
        rewards = target_benefit - self.own_benefit[i]
        return rewards, rewards - self.efforts[i]

    def best_for(self, i: int) -> tuple[int | None, UtilityBreakdown]:
        rewards, utils = self.scan(i)
        j = int(np.argmax(utils))  # ties resolve to the lowest index
        best = UtilityBreakdown(
            reward=float(rewards[j]),
            effort=float(self.efforts[i, j]),
            utility=float(utils[j]),
        )
        if best.utility > 0.0:
            return j, best
        return None, best


def select_role_model(
    h, pop: Population, params: EffortParams, benefit: str, i: int
) -> tuple[int | None, UtilityBreakdown]:
    """Utility-maximizing candidate for individual i, if strictly positive.

    Returns the argmax candidate's breakdown either way; the index is
    present only when imitation would actually improve utility.
    """
    return _Selector(h, pop, params, benefit).best_for(i)


def simulate(h, pop: Population, params: EffortParams, benefit: str) -> ImpactResult:
    """Apply the imitation rule to every individual against the frozen data."""
    sel = _Selector(h, pop, params, benefit)
    mutable = pop.schema.mutable_mask
    new_X = pop.X.copy()
    new_y = pop.y.copy()
    outcomes: list[ImitationOutcome] = []
    focal_order: dict[bytes, int] = {}
    focal_counts: dict[bytes, int] = {}
    focal_vectors: dict[bytes, np.ndarray] = {}
    for i in range(pop.size):
        j, best = sel.best_for(i)
        if j is None:
            outcomes.append(
                ImitationOutcome(
                    individual_index=i,
                    role_model_index=None,
                    exerted=ZERO_BREAKDOWN,
                    changed=False,
                    new_x=pop.X[i].copy(),
                    new_y=float(pop.y[i]),
                )
            )
            continue
        target = pop.X[i].copy()
        target[mutable] = pop.X[j, mutable]
        new_X[i] = target
        new_y[i] = pop.y[j]
        outcomes.append(
            ImitationOutcome(
                individual_index=i,
                role_model_index=j,
                exerted=best,
                changed=True,
                new_x=target,
                new_y=float(pop.y[j]),
            )
        )
        key = pop.X[j, mutable].tobytes()
        if key not in focal_order:
            focal_order[key] = len(focal_order)
            focal_vectors[key] = pop.X[j, mutable].copy()
            focal_counts[key] = 0
        focal_counts[key] += 1
    impacted = Population(pop.schema, new_X, new_y, pop.groups)
    focal_points = [
        FocalPoint(vector=focal_vectors[k], count=focal_counts[k])
        for k in sorted(focal_order, key=focal_order.get)
    ]
    return ImpactResult(
        outcomes=outcomes,
        impacted=impacted,
        focal_points=focal_points,
        metadata={
            "benefit": benefit,
            "alpha": params.alpha,
            "label_rule": "adopt_role_model_label",
            "rounds": 1,
        },
    )


def feature_shift_report(original: Population, impacted: Population, bins: int = 10) -> dict:
    """Per-feature, per-group before/after summary: mean, variance, histogram."""
    if original.schema.names != impacted.schema.names:
        raise ValueError("populations must share a schema")
    report: dict = {}
    for k, feature in enumerate(original.schema.features):
        lo = float(min(original.X[:, k].min(), impacted.X[:, k].min()))
        hi = float(max(original.X[:, k].max(), impacted.X[:, k].max()))
        if hi == lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, bins + 1)
        per_group: dict = {}
        for g in original.group_names:
            rows_before = original.group_rows(g)
            rows_after = impacted.group_rows(g)
            before = original.X[rows_before, k]
            after = impacted.X[rows_after, k]
            per_group[g] = {
                "mean_before": float(np.mean(before)),
                "mean_after": float(np.mean(after)),
                "var_before": float(np.var(before)),
                "var_after": float(np.var(after)),
                "hist_before": np.histogram(before, bins=edges)[0].tolist(),
                "hist_after": np.histogram(after, bins=edges)[0].tolist(),
            }
        report[feature.name] = {"bin_edges": edges.tolist(), "groups": per_group}
    return report
