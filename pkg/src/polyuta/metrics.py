"""Rank agreement between weak orders (rankings with ties)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import MetricError


@dataclass(frozen=True)
class Ranking:
    """Indifference classes ordered from best to worst."""

    classes: tuple[tuple[Hashable, ...], ...]

    def __init__(self, classes: Iterable[Iterable[Hashable]]):
        cls = tuple(tuple(c) for c in classes)
        seen: set = set()
        for c in cls:
            if not c:
                raise ValueError("empty indifference class")
            for a in c:
                if a in seen:
                    raise ValueError(f"alternative {a!r} appears twice")
                seen.add(a)
        object.__setattr__(self, "classes", cls)

    @classmethod
    def from_scores(cls, ids: Sequence[Hashable], scores: Sequence[float], tie_tol: float = 1e-9) -> "Ranking":
        """Group by decreasing score; a gap above ``tie_tol`` starts a new class.

        Members of a class keep their input order.
        """
        scores = np.asarray(scores, dtype=float)
        if len(ids) != len(scores):
            raise ValueError("ids and scores differ in length")
        if len(ids) == 0:
            return cls(())
        order = np.argsort(-scores, kind="stable")
        groups: list[list[int]] = [[int(order[0])]]
        for prev, cur in zip(order[:-1], order[1:]):
            if scores[prev] - scores[cur] > tie_tol:
                groups.append([])
            groups[-1].append(int(cur))
        return cls([ids[i] for i in sorted(g)] for g in groups)

    def ids(self) -> list:
        return [a for c in self.classes for a in c]

    def positions(self) -> dict:
        return {a: k for k, c in enumerate(self.classes) for a in c}

    def __len__(self) -> int:
        return sum(len(c) for c in self.classes)


def _aligned(r1: Ranking, r2: Ranking) -> tuple[np.ndarray, np.ndarray]:
    p1, p2 = r1.positions(), r2.positions()
    if p1.keys() != p2.keys():
        raise MetricError("rankings cover different alternatives")
    ids = list(p1)
    return np.array([p1[a] for a in ids]), np.array([p2[a] for a in ids])


def _tau_b(c: int, d: int, t1: int, t2: int) -> float:
    den = (c + d + t1) * (c + d + t2)
    if den == 0:
        return math.nan
    return (c - d) / math.sqrt(den)


def kendall_tau(r1: Ranking, r2: Ranking) -> float:
    """Tau-b: ``(C - D) / sqrt((C + D + T1) (C + D + T2))``.

    ``T1`` (``T2``) counts pairs tied in ``r1`` (``r2``) only.  Returns NaN
    when both rankings are a single class.
    """
    a, b = _aligned(r1, r2)
    i, j = np.triu_indices(len(a), 1)
    sa = np.sign(a[i] - a[j])
    sb = np.sign(b[i] - b[j])
    prod = sa * sb
    c = int(np.count_nonzero(prod > 0))
    d = int(np.count_nonzero(prod < 0))
    t1 = int(np.count_nonzero((sa == 0) & (sb != 0)))
    t2 = int(np.count_nonzero((sb == 0) & (sa != 0)))
    return _tau_b(c, d, t1, t2)


def _doubled_average_ranks(pos: np.ndarray) -> np.ndarray:
    # twice the mean 1-based position of each class, kept integral
    sizes = np.bincount(pos)
    start = np.concatenate([[1], 1 + np.cumsum(sizes)[:-1]])
    return (2 * start + sizes - 1)[pos]


def _pearson_int(u: Sequence[int], v: Sequence[int]) -> float:
    m = len(u)
    su, sv = sum(u), sum(v)
    num = m * sum(x * y for x, y in zip(u, v)) - su * sv
    den = (m * sum(x * x for x in u) - su * su) * (m * sum(y * y for y in v) - sv * sv)
    if den == 0:
        return math.nan
    return num / math.sqrt(den)


def spearman(r1: Ranking, r2: Ranking) -> float:
    """Spearman correlation on average ranks (Pearson of mid-ranks).

    Ranks are doubled so every sum is an exact integer; NaN when either
    ranking is a single class.
    """
    a, b = _aligned(r1, r2)
    u = [int(x) for x in _doubled_average_ranks(a)]
    v = [int(x) for x in _doubled_average_ranks(b)]
    return _pearson_int(u, v)


def consecutive_pairs(r: Ranking) -> tuple[list[tuple], list[tuple]]:
    """Statements comparing each alternative with the next one in ``r``.

    Returns ``(prefer, indiff)``; together they hold ``len(r) - 1`` pairs.
    """
    prefer: list[tuple] = []
    indiff: list[tuple] = []
    flat = [(a, k) for k, c in enumerate(r.classes) for a in c]
    for (a, ka), (b, kb) in zip(flat[:-1], flat[1:]):
        (indiff if ka == kb else prefer).append((a, b))
    return prefer, indiff
