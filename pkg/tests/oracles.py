"""Independent brute-force reference implementations for the test suite.

Everything here is deliberately written as plain Python loops over counts
and values: ranks are counted directly, candidate scans enumerate every
pair, the clustering index evaluates its double sums literally, and the
spectral index uses dense eigendecomposition instead of power iteration.
These functions never call the library's vectorized paths.
"""

from __future__ import annotations

import math

import numpy as np


def rank_leq(values, x) -> float:
    return sum(1 for v in values if v <= x) / len(values)


def rank_geq(values, x) -> float:
    return sum(1 for v in values if v >= x) / len(values)


def group_values(pop, group, k) -> list[float]:
    return [float(pop.X[i, k]) for i in range(pop.size) if pop.groups[i] == group]


def feature_effort(feature, values, a, b, default_categorical_cost) -> float:
    kind = feature.kind.kind
    if a == b:
        return 0.0
    if kind == "categorical":
        if feature.categorical_cost is not None:
            return feature.categorical_cost
        return default_categorical_cost
    if kind == "immutable":
        return math.inf
    if kind in ("numerical_monotone", "ordinal_monotone"):
        if feature.kind.direction == "increasing":
            return max(0.0, rank_leq(values, b) - rank_leq(values, a))
        return max(0.0, rank_geq(values, b) - rank_geq(values, a))
    if kind in ("numerical_nonmonotone", "ordinal_nonmonotone"):
        return abs(rank_leq(values, b) - rank_leq(values, a))
    if kind == "conditionally_immutable":
        if feature.kind.direction == "increasing":
            return rank_leq(values, b) - rank_leq(values, a) if b > a else math.inf
        return rank_geq(values, b) - rank_geq(values, a) if b < a else math.inf
    raise AssertionError(f"unhandled kind {kind}")


def total_effort(reference, params, group, xa, xb) -> float:
    """Base cost plus weighted per-feature efforts, quantiles from ``reference``."""
    schema = reference.schema
    acc = 0.0
    for k, feature in enumerate(schema.features):
        w = params.weight_for(group, feature)
        if w == 0.0:
            continue
        values = group_values(reference, group, k)
        acc = acc + w * feature_effort(
            feature, values, float(xa[k]), float(xb[k]), params.categorical_cost
        )
    return params.base_cost_for(group) + acc / schema.size


def benefit(name, y, y_hat) -> float:
    if name == "predicted":
        return y_hat
    if name == "shifted_gain":
        return y_hat - y + 1.0
    raise AssertionError(name)


def benefit_vector(h, pop, params, name) -> list[float]:
    preds = h.predict(pop)
    out = []
    for i in range(pop.size):
        b = benefit(name, float(pop.y[i]), float(preds[i]))
        out.append(b if params.alpha == 1.0 else b ** params.alpha)
    return out


def group_mean(pop, values_by_index) -> dict:
    sums: dict = {}
    counts: dict = {}
    for i, v in values_by_index.items():
        g = pop.groups[i]
        sums[g] = sums.get(g, 0.0) + v
        counts[g] = counts.get(g, 0) + 1
    return {g: sums[g] / counts[g] for g in sums}


def effort_matrix(pop, params) -> list[list[float]]:
    return [
        [total_effort(pop, params, pop.groups[i], pop.X[i], pop.X[j]) for j in range(pop.size)]
        for i in range(pop.size)
    ]


def bounded_effort(h, pop, params, name, delta, E=None) -> dict:
    bene = benefit_vector(h, pop, params, name)
    if E is None:
        E = effort_matrix(pop, params)
    per_individual = {}
    for i in range(pop.size):
        best = None
        for j in range(pop.size):
            e = E[i][j]
            if math.isfinite(e) and e <= delta:
                r = bene[j] - bene[i]
                if best is None or r > best:
                    best = r
        per_individual[i] = best if best is not None else 0.0
    return group_mean(pop, per_individual)


def threshold_reward(h, pop, params, name, delta, E=None) -> tuple[dict, dict]:
    bene = benefit_vector(h, pop, params, name)
    if E is None:
        E = effort_matrix(pop, params)
    per_individual = {}
    feasible_count: dict = {}
    group_size: dict = {}
    for i in range(pop.size):
        g = pop.groups[i]
        group_size[g] = group_size.get(g, 0) + 1
        best = None
        for j in range(pop.size):
            if bene[j] - bene[i] >= delta:
                e = E[i][j]
                if math.isfinite(e) and (best is None or e < best):
                    best = e
        if best is not None:
            per_individual[i] = best
            feasible_count[g] = feasible_count.get(g, 0) + 1
    values = group_mean(pop, per_individual) if per_individual else {}
    groups = sorted(group_size)
    return (
        {g: values.get(g) for g in groups},
        {g: feasible_count.get(g, 0) / group_size[g] for g in groups},
    )


def effort_reward(h, pop, params, name, E=None) -> dict:
    bene = benefit_vector(h, pop, params, name)
    if E is None:
        E = effort_matrix(pop, params)
    per_individual = {}
    for i in range(pop.size):
        best = 0.0  # staying put
        for j in range(pop.size):
            e = E[i][j]
            u = -math.inf if math.isinf(e) else (bene[j] - bene[i]) - e
            if u > best:
                best = u
        per_individual[i] = best
    return group_mean(pop, per_individual)


def role_model(h, pop, params, name, i) -> tuple[int | None, float]:
    """(best index or None, best utility) for the imitation rule.

    The individual's own benefit is predicted through the same single-row
    route as the imitation targets, so a no-op target scores an exact zero
    reward and the strict-positivity rule has no float fuzz at zero.
    """
    mutable = [k for k, f in enumerate(pop.schema.features) if f.mutable]
    own_pred = float(h.predict_rows(pop.schema, np.array([pop.X[i].tolist()]))[0])
    own_benefit = benefit(name, float(pop.y[i]), own_pred)
    if params.alpha != 1.0:
        own_benefit = own_benefit ** params.alpha
    best_j, best_u = None, -math.inf
    for j in range(pop.size):
        target = [float(v) for v in pop.X[i]]
        for k in mutable:
            target[k] = float(pop.X[j, k])
        pred = float(h.predict_rows(pop.schema, np.array([target]))[0])
        b = benefit(name, float(pop.y[j]), pred)
        if params.alpha != 1.0:
            b = b ** params.alpha
        e = total_effort(pop, params, pop.groups[i], pop.X[i], target)
        u = (b - own_benefit) - e
        if u > best_u:
            best_j, best_u = j, u
    return (best_j if best_u > 0.0 else None), best_u


def directed_view(reference, params, group, xi, yi, xj, yj) -> float:
    labels = [float(reference.y[r]) for r in range(reference.size) if reference.groups[r] == group]
    total = max(0.0, rank_leq(labels, yj) - rank_leq(labels, yi))
    for k, feature in enumerate(reference.schema.features):
        if not feature.mutable:
            continue
        values = group_values(reference, group, k)
        total += feature_effort(
            feature, values, float(xi[k]), float(xj[k]), params.categorical_cost
        )
    return total


def distance(reference, params, pop, i, j) -> float:
    return max(
        directed_view(reference, params, pop.groups[i], pop.X[i], pop.y[i], pop.X[j], pop.y[j]),
        directed_view(reference, params, pop.groups[j], pop.X[i], pop.y[i], pop.X[j], pop.y[j]),
    )


def distance_matrix(reference, params, pop) -> list[list[float]]:
    return [[distance(reference, params, pop, i, j) for j in range(pop.size)] for i in range(pop.size)]


def aci(dist, minority_flags) -> float | None:
    """Literal evaluation of the clustering formula with c_ij = exp(-d_ij)."""
    n = len(dist)
    m = sum(minority_flags)
    num1 = num2 = den1 = 0.0
    for i in range(n):
        for j in range(n):
            c = math.exp(-dist[i][j])
            num1 += c * (minority_flags[i] / m) * minority_flags[j]
            num2 += c * (1.0 / n) * (m / n)
            den1 += c * (minority_flags[i] / m) * 1.0
    if den1 - num2 == 0.0:
        return None
    return (num1 - num2) / (den1 - num2)


def focal_assignment(reference, params, pop, focal_vectors) -> list[int]:
    """Nearest focal point per individual; mutable-subspace effort distance."""
    mutable = [k for k, f in enumerate(reference.schema.features) if f.mutable]
    out = []
    for i in range(pop.size):
        best_f, best_d = None, None
        for fi, vec in enumerate(focal_vectors):
            d = 0.0
            for pos, k in enumerate(mutable):
                feature = reference.schema.features[k]
                values = group_values(reference, pop.groups[i], k)
                d += feature_effort(
                    feature, values, float(pop.X[i, k]), float(vec[pos]), params.categorical_cost
                )
            if best_d is None or d < best_d:
                best_f, best_d = fi, d
        out.append(best_f)
    return out


def atkinson(minority_counts, totals, beta) -> float:
    T = sum(totals)
    M = sum(minority_counts)
    P = M / T
    inner = 0.0
    for m_i, t_i in zip(minority_counts, totals):
        if t_i == 0:
            continue
        p = m_i / t_i
        if 0.0 < p < 1.0:
            inner += (1.0 - p) ** (1.0 - beta) * p**beta * t_i
    inner /= T * P
    return 1.0 - (P / (1.0 - P)) * inner ** (1.0 / (1.0 - beta))


def ssi(similarity) -> float:
    """Spectral segregation via dense eigendecomposition (no power iteration).

    The similarity matrix may be asymmetric; components use undirected
    connectivity and the dominant (Perron) eigenpair comes from the general
    eigensolver.
    """
    B = np.array(similarity, dtype=float)
    n = B.shape[0]
    unseen = set(range(n))
    scores = np.zeros(n)
    while unseen:
        start = min(unseen)
        comp = {start}
        frontier = [start]
        while frontier:
            v = frontier.pop()
            for w in range(n):
                if (B[v, w] != 0.0 or B[w, v] != 0.0) and w not in comp:
                    comp.add(w)
                    frontier.append(w)
        unseen -= comp
        members = sorted(comp)
        sub = B[np.ix_(members, members)]
        eigvals, eigvecs = np.linalg.eig(sub)
        top = int(np.argmax(eigvals.real))
        lam = float(eigvals[top].real)
        vec = eigvecs[:, top].real
        if vec.sum() < 0:
            vec = -vec
        total = float(vec.sum())
        if total != 0.0:
            vec = vec / total
            for pos, idx in enumerate(members):
                scores[idx] = lam * float(vec[pos]) * len(members)
    return float(np.mean(scores))
