import pytest

from polyuta.core import Alternative, CriterionScale, LearningSet

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="module")
def tradeoff_set():
    """Four alternatives on two [0, 100] criteria; a ~ b, a > c, c > d.

    Any linear model scores a, b, c, d alike here, so separating c from d
    needs curved marginals.
    """
    crit = [CriterionScale("g1", 0, 100), CriterionScale("g2", 0, 100)]
    alts = [
        Alternative("a", (100, 0)),
        Alternative("b", (0, 100)),
        Alternative("c", (25, 75)),
        Alternative("d", (75, 25)),
    ]
    return LearningSet(crit, alts, prefer=[("a", "c"), ("c", "d")], indiff=[("a", "b")])


@pytest.fixture(scope="module")
def three_alts_set():
    """Small integer instance whose program coefficients are easy to check by hand."""
    crit = [CriterionScale("x", 0, 10), CriterionScale("y", 0, 10)]
    alts = [Alternative("a1", (10, 7)), Alternative("a2", (6, 8)), Alternative("a3", (7, 5))]
    return LearningSet(crit, alts, prefer=[("a1", "a2"), ("a2", "a3")])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
