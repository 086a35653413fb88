"""Brute-force oracles for every metric and for the rank statistics.

Everything here is written out with plain loops over Python lists and shares
no code with :mod:`homog.metrics` or :mod:`homog.stats`. When the two
disagree, the fast path is wrong.
"""

from __future__ import annotations

import math

import numpy as np

from homog.outcomes import OutcomeMatrix


def _mean(xs):
    total = 0.0
    for v in xs:
        total += v
    return total / len(xs)


def _product(xs):
    out = 1.0
    for v in xs:
        out *= v
    return out


def _div(num, den):
    return None if den == 0 else num / den


def oracle_metrics(matrix: OutcomeMatrix) -> dict:
    """Recompute every metric naively.

    Values are floats, or ``None`` where the metric is degenerate, undefined
    or inapplicable. ``excluded_groups`` lists groups dropped for being empty
    in some deployment.
    """
    F = matrix.failures.tolist()
    M = matrix.mask.tolist()
    N = len(F)
    K = len(F[0])
    full = all(M[j][i] == 1 for j in range(N) for i in range(K))
    out: dict = {}

    rates = []
    for i in range(K):
        seen = [F[j][i] for j in range(N) if M[j][i] == 1]
        rates.append(sum(seen) / len(seen))
        out[f"failure_rate:{matrix.deployment_ids[i]}"] = rates[i]

    # observed systemic failure over interactions, expected over the same subsets
    observed = []
    expected = []
    for j in range(N):
        fails_all = 1
        exp_j = 1.0
        for i in range(K):
            if M[j][i] == 1:
                fails_all = fails_all * F[j][i]
                exp_j = exp_j * rates[i]
        observed.append(fails_all)
        expected.append(exp_j)
    num = _mean(observed)
    den = _product(rates) if full else _mean(expected)
    out["oh_individual"] = _div(num, den)
    out["systemic_failure_rate"] = num if full else None
    out["expected_systemic_rate"] = _product(rates) if full else None

    # groups
    G = None if matrix.groups is None else matrix.groups.tolist()
    excluded = []
    for key in ("oh_group_average", "oh_group_uniform", "oh_group_worst", "unfairness"):
        out[key] = None
    if G is not None and full:
        labels = sorted({G[j][i] for j in range(N) for i in range(K)})
        prods = {}
        joint = {}
        for g in labels:
            per_dep = []
            freq = []
            for i in range(K):
                members = [F[j][i] for j in range(N) if G[j][i] == g]
                if members:
                    per_dep.append(sum(members) / len(members))
                freq.append(len(members) / N)
            if len(per_dep) < K:
                excluded.append(g)
                continue
            prods[g] = _product(per_dep)
            joint[g] = _product(freq)
        if prods:
            den = _product(rates)
            z = sum(joint.values())
            out["oh_group_average"] = _div(sum(joint[g] / z * prods[g] for g in prods), den)
            out["oh_group_uniform"] = _div(sum(prods.values()) / len(prods), den)
            out["oh_group_worst"] = _div(max(prods.values()), den)
            mu = _mean(list(prods.values()))
            out["unfairness"] = _mean([(p - mu) ** 2 for p in prods.values()])
    out["excluded_groups"] = tuple(excluded)

    # two-deployment relatives
    out["covariance"] = out["pmi"] = out["pearson"] = None
    if K == 2 and full:
        both = _mean([F[j][0] * F[j][1] for j in range(N)])
        a, b = rates
        out["covariance"] = both - a * b
        if a * b > 0 and both > 0:
            out["pmi"] = math.log(both / (a * b))
        v = a * (1 - a) * b * (1 - b)
        if v > 0:
            out["pearson"] = (both - a * b) / math.sqrt(v)

    # losses
    out["loss_oh"] = out["minexp"] = out["expexp"] = None
    if matrix.losses is not None and full:
        L = matrix.losses.tolist()
        mean_loss = [_mean([L[j][i] for j in range(N)]) for i in range(K)]
        prod_mean = _mean([_product(L[j]) for j in range(N)])
        best_case = _mean([min(L[j]) for j in range(N)])
        out["loss_oh"] = _div(prod_mean, _product(mean_loss))
        out["minexp"] = _div(best_case, min(mean_loss))
        out["expexp"] = _div(best_case, _mean(mean_loss))
    return out


def _naive_ranks(v):
    # rank = 1 + #smaller + (#ties - 1) / 2, counted pairwise
    n = len(v)
    ranks = []
    for a in range(n):
        smaller = 0
        equal = 0
        for b in range(n):
            if v[b] < v[a]:
                smaller += 1
            elif v[b] == v[a]:
                equal += 1
        ranks.append(1 + smaller + (equal - 1) / 2)
    return ranks


def _naive_pearson(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sxx = syy = 0.0
    for a in range(n):
        sxy += (x[a] - mx) * (y[a] - my)
        sxx += (x[a] - mx) ** 2
        syy += (y[a] - my) ** 2
    if sxx == 0 or syy == 0:
        return None
    return sxy / math.sqrt(sxx * syy)


def oracle_rank_stats(x, y) -> tuple[float | None, float | None]:
    """``(pearson, spearman)`` by direct summation and O(n^2) ranking."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if len(x) != len(y):
        raise ValueError("series lengths differ")
    return _naive_pearson(x, y), _naive_pearson(_naive_ranks(x), _naive_ranks(y))


def random_matrix(rng, max_n: int = 50, max_k: int = 4) -> OutcomeMatrix:
    """Random well-formed matrix for fuzzing: masked, grouped or loss-bearing."""
    n = int(rng.integers(2, max_n + 1))
    k = int(rng.integers(1, max_k + 1))
    p = rng.uniform(0.05, 0.95, size=k)
    failures = (rng.random((n, k)) < p).astype(int)
    kind = rng.choice(["full", "masked", "grouped", "per-deployment-groups"])
    mask = None
    groups = None
    if kind == "masked":
        mask = (rng.random((n, k)) < 0.7).astype(int)
        mask[np.arange(n), rng.integers(0, k, size=n)] = 1
        for i in range(k):
            if not mask[:, i].any():
                mask[rng.integers(0, n), i] = 1
    elif kind == "grouped":
        n_groups = int(rng.integers(1, 6))
        groups = [f"g{v}" for v in rng.integers(0, n_groups, size=n)]
    elif kind == "per-deployment-groups":
        n_groups = int(rng.integers(1, 5))
        groups = np.array([[f"g{v}" for v in row] for row in rng.integers(0, n_groups, size=(n, k))])
    losses = None
    if kind != "masked" and rng.random() < 0.5:
        losses = rng.exponential(1.0, size=(n, k))
        if rng.random() < 0.3:
            losses = failures.astype(float)
    return OutcomeMatrix.from_arrays(failures, mask=mask, groups=groups, losses=losses)


def cross_check(matrix: OutcomeMatrix, tol: float = 1e-12) -> list[str]:
    """Compare the fast path against the oracle; return one line per disagreement."""
    from homog import metrics

    fast = metrics.all_metrics(matrix)
    slow = oracle_metrics(matrix)
    problems = []
    for name, expected in slow.items():
        if name == "excluded_groups":
            continue
        got = fast[name].value
        if (got is None) != (expected is None):
            problems.append(f"{name}: fast={got!r} oracle={expected!r}")
        elif got is not None and abs(got - expected) > tol * max(1.0, abs(expected)):
            problems.append(f"{name}: fast={got!r} oracle={expected!r}")
    if matrix.groups is not None and matrix.fully_observed:
        products, _ = metrics.group_products(matrix)
        fast_excluded = tuple(sorted(set(matrix.group_labels()) - set(products)))
        if fast_excluded != slow["excluded_groups"]:
            problems.append(
                f"excluded_groups: fast={fast_excluded!r} oracle={slow['excluded_groups']!r}")
    return problems
