"""Independent re-implementations used to check the package.

Nothing here imports the code under test's arithmetic: membership shapes,
conjunctions, votes and sums are written out directly from their
definitions so that a shared bug cannot make both sides agree.
"""

from __future__ import annotations

import math


def triangle(x, a, b, c):
    if x == b:
        return 1.0
    if x <= a or x >= c:
        return 0.0
    if x < b:
        return (x - a) / (b - a)
    return (c - x) / (c - b)


def trapezoid(x, a, b, c, d):
    if b <= x <= c:
        return 1.0
    if x <= a or x >= d:
        return 0.0
    if x < b:
        return (x - a) / (b - a)
    return (d - x) / (d - c)


def degree(var, term_index, value):
    """Membership of ``value`` in one term, from the raw parameters."""
    mf = var.terms[term_index].membership
    if mf.kind == "singleton":
        return 1.0 if str(value) == mf.category else 0.0
    lo, hi = var.domain
    x = min(max(float(value), lo), hi)
    if mf.kind == "triangular":
        return triangle(x, *mf.params)
    return trapezoid(x, *mf.params)


def brute_force_infer(model, sample):
    """Return (chosen class as int, abstained, {0: score, 1: score})."""
    crossing_terms, staying_terms = [], []
    for rule in model.rules:
        degs = [degree(model.variables[v], t, sample[model.variables[v].name]) for v, t in rule.antecedents]
        if model.tnorm.value == "product":
            f = 1.0
            for d in degs:
                f *= d
        else:
            f = min(degs)
        a = f * rule.weight
        (crossing_terms if int(rule.consequent) == 1 else staying_terms).append(a)
    if model.decision.value == "weighted-vote":
        cross, stay = math.fsum(crossing_terms), math.fsum(staying_terms)
    else:
        cross, stay = max(crossing_terms, default=0.0), max(staying_terms, default=0.0)
    if max(cross, stay) <= model.abstain_threshold or cross == stay:
        return 0, True, {0: stay, 1: cross}
    return (1 if cross > stay else 0), False, {0: stay, 1: cross}


def summed_support_confidence(firings, labels, consequent):
    """Support and confidence by plain loops over per-sample firing values."""
    total = 0.0
    match = 0.0
    for f, y in zip(firings, labels):
        total += f
        if y == consequent:
            match += f
    if total == 0:
        return 0.0, 0.0
    return total / len(firings), match / total


def pearson(xs, ys):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    return sxy / math.sqrt(sxx * syy)
