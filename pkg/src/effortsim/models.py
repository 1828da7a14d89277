"""Regression models: least squares, ridge, CART, penalized linear, MLP.

Every fitted model remembers the feature names it was trained on and, at
prediction time, pulls exactly those columns (by name, in fit order) out
of whatever population it is given. That lets models trained on a
restricted feature set and models trained on the full set be compared on
one and the same population.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dataset import DataError, FeatureSchema, Population
from .effort import BENEFIT_PREDICTED, benefit_value

JITTER = 1e-8


class Predictor:
    """Common interface: named features in, finite predictions out."""

    kind: str = "base"

    def __init__(self, feature_names: Sequence[str], hyperparameters: Mapping | None = None):
        self.feature_names: tuple[str, ...] = tuple(feature_names)
        self.hyperparameters: dict = dict(hyperparameters or {})

    def _design(self, schema: FeatureSchema, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        cols = [schema.index(name) for name in self.feature_names]
        return X[:, cols]

    def predict_rows(self, schema: FeatureSchema, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, pop: Population) -> np.ndarray:
        return self.predict_rows(pop.schema, pop.X)

    def to_dict(self) -> dict:
        raise NotImplementedError


class LinearPredictor(Predictor):
    """w . x + intercept; also the shape of ridge and penalized fits."""

    def __init__(self, feature_names, weights, intercept, kind="linear", hyperparameters=None):
        super().__init__(feature_names, hyperparameters)
        self.kind = kind
        self.weights = np.asarray(weights, dtype=np.float64)
        self.intercept = float(intercept)
        if self.weights.shape != (len(self.feature_names),):
            raise DataError("weight vector length must match feature list")

    def predict_rows(self, schema: FeatureSchema, X: np.ndarray) -> np.ndarray:
        return self._design(schema, X) @ self.weights + self.intercept

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "features": list(self.feature_names),
            "weights": [float(w) for w in self.weights],
            "intercept": self.intercept,
            "hyperparameters": self.hyperparameters,
        }


class TreePredictor(Predictor):
    """Binary regression tree stored as parallel node arrays.

    Node i: ``feature[i]`` < 0 marks a leaf predicting ``value[i]``;
    otherwise rows with column value <= ``threshold[i]`` go to
    ``left[i]``, the rest to ``right[i]``.
    """

    kind = "tree"

    def __init__(self, feature_names, nodes, hyperparameters=None):
        super().__init__(feature_names, hyperparameters)
        self.nodes = nodes  # list of dicts: feature, threshold, left, right, value

    def predict_rows(self, schema: FeatureSchema, X: np.ndarray) -> np.ndarray:
        D = self._design(schema, X)
        out = np.empty(D.shape[0])
        stack = [(0, np.arange(D.shape[0]))]
        while stack:
            node_id, rows = stack.pop()
            if rows.size == 0:
                continue
            node = self.nodes[node_id]
            if node["feature"] < 0:
                out[rows] = node["value"]
                continue
            mask = D[rows, node["feature"]] <= node["threshold"]
            stack.append((node["left"], rows[mask]))
            stack.append((node["right"], rows[~mask]))
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "features": list(self.feature_names),
            "nodes": self.nodes,
            "hyperparameters": self.hyperparameters,
        }


@dataclass(frozen=True)
class FitReport:
    model_kind: str
    hyperparameters: dict
    mae_overall: float
    mae_per_group: dict

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "hyperparameters": self.hyperparameters,
            "mae_overall": self.mae_overall,
            "mae_per_group": self.mae_per_group,
        }


def _design_with_intercept(pop: Population) -> np.ndarray:
    return np.column_stack([pop.X, np.ones(pop.size)])


def _solve_least_squares(A: np.ndarray, y: np.ndarray, lam: float) -> tuple[np.ndarray, bool]:
    """Normal equations with an unpenalized intercept (last column).

    Returns (coefficients, jitter_used). A singular system at lam == 0
    falls back to adding 1e-8 to the whole diagonal.
    """
    G = A.T @ A
    if lam:
        penalty = np.full(A.shape[1], float(lam))
        penalty[-1] = 0.0
        G = G + np.diag(penalty)
    b = A.T @ y
    jitter_used = False
    try:
        w = np.linalg.solve(G, b)
        scale = float(np.abs(b).max()) if b.size else 1.0
        ok = bool(np.all(np.isfinite(w))) and float(np.abs(G @ w - b).max()) <= 1e-6 * max(
            scale, 1.0
        )
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        jitter_used = True
        w = np.linalg.solve(G + JITTER * np.eye(A.shape[1]), b)
    return w, jitter_used


def fit_ridge(pop: Population, lam: float) -> LinearPredictor:
    """Closed-form ridge; ``lam == 0`` is exactly ordinary least squares."""
    if lam < 0:
        raise DataError(f"ridge penalty must be >= 0, got {lam}")
    A = _design_with_intercept(pop)
    w, jitter_used = _solve_least_squares(A, pop.y, lam)
    hyper: dict = {"lambda": float(lam)}
    if jitter_used:
        hyper["jitter"] = JITTER
    kind = "ridge" if lam else "linear"
    return LinearPredictor(pop.schema.names, w[:-1], w[-1], kind=kind, hyperparameters=hyper)


def fit_linear(pop: Population) -> LinearPredictor:
    return fit_ridge(pop, 0.0)


def _node_sse(y_sum: float, y_sq: float, n: int) -> float:
    return y_sq - y_sum * y_sum / n


def _best_split(D: np.ndarray, y: np.ndarray) -> tuple[int, float, float] | None:
    """Exhaustive midpoint scan; returns (feature, threshold, child SSE)."""
    n = y.shape[0]
    best: tuple[float, int, float] | None = None  # (sse, feature, threshold)
    for k in range(D.shape[1]):
        order = np.argsort(D[:, k], kind="stable")
        xs = D[order, k]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        total_sum = csum[-1]
        total_sq = csq[-1]
        distinct = np.flatnonzero(xs[1:] != xs[:-1])  # split after position i
        for i in distinct:
            nl = int(i) + 1
            nr = n - nl
            sse = _node_sse(csum[i], csq[i], nl) + _node_sse(
                total_sum - csum[i], total_sq - csq[i], nr
            )
            thr = (xs[i] + xs[i + 1]) / 2.0
            if best is None or sse < best[0]:
                best = (sse, k, thr)
    if best is None:
        return None
    return best[1], best[2], best[0]


def fit_tree(pop: Population, max_depth: int = 5) -> TreePredictor:
    """Greedy CART minimizing child SSE, splitting only while it helps.

    Tie-breaking is lowest feature index, then lowest threshold (the scan
    order), so fits are deterministic.
    """
    if max_depth < 0:
        raise DataError("max_depth must be >= 0")
    D = pop.X
    y = pop.y
    nodes: list[dict] = []

    def build(rows: np.ndarray, depth: int) -> int:
        node_id = len(nodes)
        nodes.append({})
        ys = y[rows]
        value = float(np.mean(ys))
        if depth >= max_depth or rows.size < 2 or np.all(ys == ys[0]):
            nodes[node_id] = {"feature": -1, "threshold": 0.0, "left": -1, "right": -1, "value": value}
            return node_id
        found = _best_split(D[rows], ys)
        node_sse = _node_sse(float(np.sum(ys)), float(np.sum(ys * ys)), rows.size)
        if found is None or found[2] >= node_sse:
            nodes[node_id] = {"feature": -1, "threshold": 0.0, "left": -1, "right": -1, "value": value}
            return node_id
        k, thr, _ = found
        mask = D[rows, k] <= thr
        left = build(rows[mask], depth + 1)
        right = build(rows[~mask], depth + 1)
        nodes[node_id] = {
            "feature": int(k),
            "threshold": float(thr),
            "left": left,
            "right": right,
            "value": value,
        }
        return node_id

    build(np.arange(pop.size), 0)
    return TreePredictor(pop.schema.names, nodes, {"max_depth": int(max_depth)})


def group_benefit_gap(
    h: Predictor, pop: Population, benefit: str, minority: str
) -> float:
    """Mean benefit of the non-minority group minus the minority's."""
    preds = h.predict(pop)
    bene = benefit_value(benefit, pop.y, preds)
    min_rows = pop.group_rows(minority)
    maj_rows = np.setdiff1d(np.arange(pop.size), min_rows)
    return float(np.mean(bene[maj_rows]) - np.mean(bene[min_rows]))


def fit_constrained_linear(
    pop: Population,
    tau: float,
    benefit: str = BENEFIT_PREDICTED,
    minority: str | None = None,
    max_iter: int = 500,
    tol: float = 1e-9,
) -> LinearPredictor:
    """Least squares plus ``tau * max(0, majority minus minority benefit)``.

    Deterministic full-batch descent with backtracking line search, warm
    started at the least-squares solution; ``tau == 0`` returns that
    solution unchanged. The hinge penalty stands in for a welfare
    constraint of declared strength, which is recorded in the
    hyperparameters.
    """
    if tau < 0:
        raise DataError(f"tau must be >= 0, got {tau}")
    if len(pop.group_names) != 2:
        raise DataError("constrained fitting needs exactly two groups")
    if minority is None:
        minority = pop.smallest_group()
    if minority not in pop.group_names:
        raise DataError(f"unknown minority group {minority!r}")
    majority = next(g for g in pop.group_names if g != minority)

    A = _design_with_intercept(pop)
    y = pop.y
    n = pop.size
    w0, jitter_used = _solve_least_squares(A, y, 0.0)
    hyper: dict = {
        "tau": float(tau),
        "benefit": benefit,
        "minority": minority,
        "constraint": "hinge-penalty variant",
    }
    if jitter_used:
        hyper["jitter"] = JITTER
    if tau == 0.0:
        hyper["converged"] = True
        return LinearPredictor(
            pop.schema.names, w0[:-1], w0[-1], kind="constrained", hyperparameters=hyper
        )

    maj_rows = pop.group_rows(majority)
    min_rows = pop.group_rows(minority)
    # d(mean benefit)/dw is the group-mean design row for both benefit forms
    # (benefit is linear in the prediction with slope 1).
    gap_grad = A[maj_rows].mean(axis=0) - A[min_rows].mean(axis=0)

    def gap_of(resid_free_pred: np.ndarray) -> float:
        bene = benefit_value(benefit, y, resid_free_pred)
        return float(np.mean(bene[maj_rows]) - np.mean(bene[min_rows]))

    def objective(w: np.ndarray) -> float:
        pred = A @ w
        mse = float(np.mean((pred - y) ** 2))
        return mse + tau * max(0.0, gap_of(pred))

    w = w0.copy()
    f_w = objective(w)
    converged = False
    grad_norm = math.inf
    for _ in range(max_iter):
        pred = A @ w
        grad = (2.0 / n) * (A.T @ (pred - y))
        if gap_of(pred) > 0.0:
            grad = grad + tau * gap_grad
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol * max(1.0, float(np.linalg.norm(w))):
            converged = True
            break
        step = 1.0
        improved = False
        while step >= 1e-14:
            cand = w - step * grad
            f_cand = objective(cand)
            if f_cand < f_w - 1e-4 * step * grad_norm * grad_norm:
                w, f_w = cand, f_cand
                improved = True
                break
            step /= 2.0
        if not improved:
            converged = True  # no descent direction left at float resolution
            break
    hyper["converged"] = converged
    hyper["grad_norm"] = grad_norm
    return LinearPredictor(
        pop.schema.names, w[:-1], w[-1], kind="constrained", hyperparameters=hyper
    )


class MlpPredictor(Predictor):
    kind = "mlp"

    def __init__(self, feature_names, params, scaler, hyperparameters=None):
        super().__init__(feature_names, hyperparameters)
        self.W1, self.b1, self.W2, self.b2 = params
        self.x_mean, self.x_scale = scaler

    def predict_rows(self, schema: FeatureSchema, X: np.ndarray) -> np.ndarray:
        D = (self._design(schema, X) - self.x_mean) / self.x_scale
        hidden = np.maximum(D @ self.W1 + self.b1, 0.0)
        return hidden @ self.W2 + self.b2

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "features": list(self.feature_names),
            "W1": self.W1.tolist(),
            "b1": self.b1.tolist(),
            "W2": self.W2.tolist(),
            "b2": float(self.b2),
            "x_mean": self.x_mean.tolist(),
            "x_scale": self.x_scale.tolist(),
            "hyperparameters": self.hyperparameters,
        }


def fit_mlp(
    pop: Population,
    hidden: int = 100,
    l2: float = 10.0,
    seed: int = 0,
    epochs: int = 300,
    learning_rate: float = 0.01,
) -> MlpPredictor:
    """Seeded single-hidden-layer ReLU net trained with full-batch Adam.

    Optional model: nothing downstream depends on it; it exists so the
    harness can run a nonlinear smooth model next to the tree.
    """
    rng = np.random.default_rng(seed)
    X = pop.X
    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale[x_scale == 0.0] = 1.0
    D = (X - x_mean) / x_scale
    y = pop.y
    n, d = D.shape
    W1 = rng.normal(scale=math.sqrt(2.0 / d), size=(d, hidden))
    b1 = np.zeros(hidden)
    W2 = rng.normal(scale=math.sqrt(1.0 / hidden), size=hidden)
    b2 = float(np.mean(y))
    params = [W1, b1, W2, b2]
    moments = [[np.zeros_like(np.asarray(p)), np.zeros_like(np.asarray(p))] for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    for t in range(1, epochs + 1):
        H = D @ W1 + b1
        Hr = np.maximum(H, 0.0)
        pred = Hr @ W2 + b2
        err = pred - y
        g_pred = (2.0 / n) * err
        gW2 = Hr.T @ g_pred + (l2 / n) * W2
        gb2 = float(np.sum(g_pred))
        gH = np.outer(g_pred, W2) * (H > 0)
        gW1 = D.T @ gH + (l2 / n) * W1
        gb1 = gH.sum(axis=0)
        grads = [gW1, gb1, gW2, gb2]
        for i, grad in enumerate(grads):
            g = np.asarray(grad, dtype=np.float64)
            m, v = moments[i]
            m[...] = beta1 * m + (1 - beta1) * g
            v[...] = beta2 * v + (1 - beta2) * g * g
            mh = m / (1 - beta1**t)
            vh = v / (1 - beta2**t)
            update = learning_rate * mh / (np.sqrt(vh) + eps)
            if i == 3:
                b2 -= float(update)
            else:
                params[i] -= update
        W1, b1, W2 = params[0], params[1], params[2]
        params[3] = b2
    return MlpPredictor(
        pop.schema.names,
        (W1, b1, W2, b2),
        (x_mean, x_scale),
        {"hidden": hidden, "l2": l2, "seed": seed, "epochs": epochs},
    )


def evaluate(h: Predictor, pop: Population) -> FitReport:
    """MAE overall and per group on the given population."""
    preds = h.predict(pop)
    err = np.abs(preds - pop.y)
    per_group = {g: float(np.mean(err[pop.group_rows(g)])) for g in pop.group_names}
    return FitReport(
        model_kind=h.kind,
        hyperparameters=dict(h.hyperparameters),
        mae_overall=float(np.mean(err)),
        mae_per_group=per_group,
    )


def predictor_from_dict(d: Mapping) -> Predictor:
    kind = d["kind"]
    if kind in ("linear", "ridge", "constrained"):
        return LinearPredictor(
            d["features"], d["weights"], d["intercept"], kind=kind,
            hyperparameters=d.get("hyperparameters"),
        )
    if kind == "tree":
        return TreePredictor(d["features"], list(d["nodes"]), d.get("hyperparameters"))
    if kind == "mlp":
        return MlpPredictor(
            d["features"],
            (
                np.asarray(d["W1"], dtype=np.float64),
                np.asarray(d["b1"], dtype=np.float64),
                np.asarray(d["W2"], dtype=np.float64),
                float(d["b2"]),
            ),
            (np.asarray(d["x_mean"], dtype=np.float64), np.asarray(d["x_scale"], dtype=np.float64)),
            d.get("hyperparameters"),
        )
    raise DataError(f"unknown predictor kind {kind!r}")
