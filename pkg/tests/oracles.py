"""Straightforward reference implementations used to cross-check the library."""

from __future__ import annotations

import math


def pearson(a, b):
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = sum((x - ma) ** 2 for x in a)
    vb = sum((y - mb) ** 2 for y in b)
    if va == 0 or vb == 0:
        return None
    return cov / math.sqrt(va * vb)


def ranks(values):
    """1-based ranks, ties get the mean of the positions they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    out = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            out[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return out


def spearman(x, y):
    pairs = [(a, b) for a, b in zip(x, y) if a is not None and b is not None and a == a and b == b]
    if len(pairs) < 2:
        return None
    xs, ys = zip(*pairs)
    return pearson(ranks(list(xs)), ranks(list(ys)))


def auc_pairs(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def greedy(corr, ids, groups, k=None, tau=None):
    """Seed with the lowest mean correlation to everyone else, then add the
    candidate with the lowest mean correlation to the chosen set, dropping
    every scenario that shares a group with a chosen one."""
    n = len(ids)
    means = []
    for i in range(n):
        others = [corr[i][j] for j in range(n) if j != i]
        means.append(sum(others) / len(others) if others else 0.0)
    first = min(range(n), key=lambda i: (means[i], ids[i]))
    chosen = [first]
    trace = [(ids[first], means[first])]
    pool = [j for j in range(n) if j != first and not (groups[j] & groups[first])]
    while pool:
        if k is not None and len(chosen) >= k:
            break
        scores = {j: sum(corr[i][j] for i in chosen) / len(chosen) for j in pool}
        best = min(pool, key=lambda j: (scores[j], ids[j]))
        if tau is not None and scores[best] >= tau:
            break
        chosen.append(best)
        trace.append((ids[best], scores[best]))
        pool = [j for j in pool if j != best and not (groups[j] & groups[best])]
    return trace
