import itertools
import math

import pytest

from polyuta.errors import MetricError
from polyuta.metrics import Ranking, consecutive_pairs, kendall_tau, spearman


def strict(*ids):
    return Ranking([[a] for a in ids])


def weak_orders(items):
    """Every ordered set partition of ``items``."""
    items = list(items)
    if not items:
        yield []
        return
    for size in range(1, len(items) + 1):
        for first in itertools.combinations(items, size):
            rest = [a for a in items if a not in first]
            for tail in weak_orders(rest):
                yield [list(first)] + tail


# brute-force references, written independently of the library code


def tau_reference(r1, r2):
    p1, p2 = r1.positions(), r2.positions()
    ids = list(p1)
    c = d = t1 = t2 = 0
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            a, b = ids[i], ids[j]
            s1 = (p1[a] > p1[b]) - (p1[a] < p1[b])
            s2 = (p2[a] > p2[b]) - (p2[a] < p2[b])
            if s1 * s2 > 0:
                c += 1
            elif s1 * s2 < 0:
                d += 1
            elif s1 == 0 and s2 != 0:
                t1 += 1
            elif s2 == 0 and s1 != 0:
                t2 += 1
    den = (c + d + t1) * (c + d + t2)
    return math.nan if den == 0 else (c - d) / math.sqrt(den)


def doubled_mid_ranks(r):
    out = {}
    start = 1
    for cls in r.classes:
        for a in cls:
            out[a] = 2 * start + len(cls) - 1  # twice the mean of start..start+len-1
        start += len(cls)
    return out


def spearman_reference(r1, r2):
    u, v = doubled_mid_ranks(r1), doubled_mid_ranks(r2)
    ids = list(u)
    m = len(ids)
    x = [u[a] for a in ids]
    y = [v[a] for a in ids]
    num = m * sum(p * q for p, q in zip(x, y)) - sum(x) * sum(y)
    den = (m * sum(p * p for p in x) - sum(x) ** 2) * (m * sum(q * q for q in y) - sum(y) ** 2)
    return math.nan if den == 0 else num / math.sqrt(den)


def same(a, b):
    return (math.isnan(a) and math.isnan(b)) or a == b


def test_examples():
    r = strict(*"abcd")
    assert kendall_tau(r, r) == 1.0
    assert spearman(r, r) == 1.0
    rev = strict(*"dcba")
    assert kendall_tau(r, rev) == -1.0
    assert spearman(r, rev) == -1.0
    swapped = strict(*"acbd")
    assert kendall_tau(r, swapped) == pytest.approx(4 / 6, abs=1e-15)
    assert spearman(r, swapped) == pytest.approx(0.8, abs=1e-15)


def test_no_ties_spearman_formula():
    r1, r2 = strict(*"abcdef"), strict(*"bdacfe")
    p1, p2 = r1.positions(), r2.positions()
    d2 = sum((p1[a] - p2[a]) ** 2 for a in p1)
    assert spearman(r1, r2) == pytest.approx(1 - 6 * d2 / (6 * 35), abs=1e-14)


def test_single_class_is_nan():
    r = Ranking([["a", "b", "c"]])
    assert math.isnan(kendall_tau(r, r))
    assert math.isnan(spearman(r, strict("a", "b", "c")))


def test_mismatched_sets():
    with pytest.raises(MetricError):
        kendall_tau(strict("a", "b"), strict("a", "c"))
    with pytest.raises(MetricError):
        spearman(strict("a", "b"), strict("a", "b", "c"))


def test_ranking_validation():
    with pytest.raises(ValueError):
        Ranking([["a"], ["a"]])
    with pytest.raises(ValueError):
        Ranking([["a"], []])


def test_from_scores_ties():
    r = Ranking.from_scores([1, 2, 3, 4], [0.9, 0.5, 0.5 + 1e-12, 0.1], tie_tol=1e-9)
    assert r.classes == ((1,), (2, 3), (4,))
    assert Ranking.from_scores(["x"], [0.3]).classes == (("x",),)


def test_exhaustive_against_brute_force():
    for size in range(1, 7):
        ids = list(range(size))
        orders = [Ranking(w) for w in weak_orders(ids)]
        # all pairs would be ~22M at size 6; pair every order with a fixed
        # sample of partners instead, still covering every order on both sides
        partners = orders if size <= 4 else orders[:: max(1, len(orders) // 12)]
        for r1 in orders:
            for r2 in partners:
                assert same(kendall_tau(r1, r2), tau_reference(r1, r2))
                assert same(spearman(r1, r2), spearman_reference(r1, r2))
                assert same(kendall_tau(r2, r1), tau_reference(r2, r1))
                assert same(spearman(r2, r1), spearman_reference(r2, r1))


def test_symmetry_and_relabelling():
    r1 = Ranking([["a", "b"], ["c"], ["d", "e"]])
    r2 = Ranking([["c"], ["a"], ["e", "b", "d"]])
    assert kendall_tau(r1, r2) == kendall_tau(r2, r1)
    assert spearman(r1, r2) == spearman(r2, r1)
    rename = dict(zip("abcde", "vwxyz"))
    s1 = Ranking([[rename[a] for a in c] for c in r1.classes])
    s2 = Ranking([[rename[a] for a in c] for c in r2.classes])
    assert kendall_tau(s1, s2) == kendall_tau(r1, r2)
    assert spearman(s1, s2) == spearman(r1, r2)


def test_consecutive_pairs():
    assert consecutive_pairs(strict("a", "b", "c")) == ([("a", "b"), ("b", "c")], [])
    assert consecutive_pairs(Ranking([["a", "b"], ["c"]])) == ([("b", "c")], [("a", "b")])
    prefer, indiff = consecutive_pairs(strict(*range(50)))
    assert len(prefer) + len(indiff) == 49
