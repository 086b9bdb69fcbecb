"""Brute-force reference implementations used only by the tests."""

import itertools


def rank_by_counting(values):
    # average rank = (#smaller) + (#equal + 1) / 2
    return [sum(v < x for v in values) + (sum(v == x for v in values) + 1) / 2 for x in values]


def wilcoxon_by_enumeration(a, b):
    """(R+, R-, two-sided p) by listing every sign assignment of the non-zero differences."""
    d = [round(x - y, 12) for x, y in zip(a, b)]
    ranks = rank_by_counting([abs(v) for v in d])
    r_plus = sum(r for v, r in zip(d, ranks) if v > 0) + sum(r for v, r in zip(d, ranks) if v == 0) / 2
    r_minus = sum(r for v, r in zip(d, ranks) if v < 0) + sum(r for v, r in zip(d, ranks) if v == 0) / 2
    zero_half = sum(r for v, r in zip(d, ranks) if v == 0) / 2
    movable = [r for v, r in zip(d, ranks) if v != 0]
    outcomes = []
    for signs in itertools.product((0, 1), repeat=len(movable)):
        outcomes.append(zero_half + sum(r for s, r in zip(signs, movable) if s))
    eps = 1e-9
    lower = sum(o <= r_plus + eps for o in outcomes) / len(outcomes)
    upper = sum(o >= r_plus - eps for o in outcomes) / len(outcomes)
    return r_plus, r_minus, min(1.0, 2 * min(lower, upper))
