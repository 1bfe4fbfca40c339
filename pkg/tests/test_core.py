import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyuta.core import (
    AdditiveModel,
    Alternative,
    CriterionScale,
    Form,
    LearningSet,
    Marginal,
    assign,
    evaluate_marginal,
    evaluate_model,
    learning_set_from_dict,
    load_model,
    rank,
    read_alternatives_csv,
    save_model,
    scales_from_data,
    write_alternatives_csv,
)
from polyuta.errors import DataError, DomainError, ModeError


def equal_weight_linear():
    crit = [CriterionScale("g1", 0, 100), CriterionScale("g2", 0, 100)]
    return AdditiveModel(crit, [Marginal.linear(0, 100, 0.5), Marginal.linear(0, 100, 0.5)])


def spline_model():
    """Two criteria on [0, 2]; the first is a C1 two-piece spline."""
    crit = [CriterionScale("a", 0, 2), CriterionScale("b", 0, 2)]
    # x^2/8 on [0,1], then continues with value 1/8 and slope 1/4
    m1 = Marginal(Form.SPLINE, (0, 1, 2), [(0, 0, 0.125), (-0.125, 0.25, 0.0)])
    m2 = Marginal(Form.POLYNOMIAL, (0, 2), [(0, 0.3125, 0, 0.0)])
    return AdditiveModel(crit, [m1, m2])


def test_evaluate_marginal_examples():
    m = Marginal.linear(0, 100, 0.5)
    assert evaluate_marginal(m, 25) == pytest.approx(0.125, abs=1e-15)
    assert evaluate_marginal(m, 0) == 0.0
    ident = Marginal(Form.POLYNOMIAL, (0, 1), [(0, 1, 0, 0)])
    assert evaluate_marginal(ident, 0.7) == pytest.approx(0.7, abs=1e-15)


def test_breakpoint_uses_left_piece():
    m = Marginal(Form.SPLINE, (0, 1, 2), [(0, 0.5), (0.1, 0.4)])
    assert m.value(1.0) == pytest.approx(0.5)
    assert m.value(1.0 + 1e-6) == pytest.approx(0.5000004)


def test_domain_errors():
    m = Marginal.linear(0, 100, 0.5)
    with pytest.raises(DomainError):
        evaluate_marginal(m, 100.5)
    with pytest.raises(DomainError):
        evaluate_marginal(m, -1)
    assert evaluate_marginal(m, 100 + 1e-9) == pytest.approx(0.5)


def test_evaluate_model_examples():
    model = equal_weight_linear()
    assert evaluate_model(model, Alternative("c", (25, 75))) == pytest.approx(0.5, abs=1e-15)
    assert evaluate_model(model, Alternative("lo", (0, 0))) == 0.0
    assert evaluate_model(model, Alternative("hi", (100, 100))) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DataError):
        evaluate_model(model, Alternative("x", (1,)))


def test_rank_examples(tradeoff_set):
    r = rank(equal_weight_linear(), tradeoff_set.alternatives)
    assert len(r.classes) == 1
    assert set(r.classes[0]) == {"a", "b", "c", "d"}
    assert rank(equal_weight_linear(), [Alternative("z", (3, 4))]).classes == (("z",),)
    with pytest.raises(ValueError):
        rank(equal_weight_linear(), [])


def test_rank_invariant_under_affine_rescaling():
    model = spline_model()
    rng = np.random.default_rng(5)
    alts = [Alternative(i, rng.uniform(0, 2, 2)) for i in range(30)]
    base = rank(model, alts)
    # rescaling every marginal by the same factor rescales every score by it
    scaled = AdditiveModel(
        model.criteria,
        [Marginal(m.form, m.breakpoints, [np.array(p) * 3.0 for p in m.pieces]) for m in model.marginals],
        check=False,
    )
    assert rank(scaled, alts, tie_tol=3e-9).classes == base.classes


@pytest.mark.parametrize("thresholds,score,expected", [((0.5,), 0.3, 1), ((0.5,), 0.5, 2), ((0.3, 0.7), 0.95, 3)])
def test_assign_examples(thresholds, score, expected):
    crit = [CriterionScale("g", 0, 1)]
    model = AdditiveModel(crit, [Marginal.linear(0, 1, 1.0)], thresholds)
    assert assign(model, Alternative("a", (score,))) == expected


def test_assign_without_thresholds():
    with pytest.raises(ModeError):
        assign(equal_weight_linear(), Alternative("a", (1, 1)))


def test_normalization_and_thresholds_are_checked():
    crit = [CriterionScale("g", 0, 1)]
    with pytest.raises(DataError):
        AdditiveModel(crit, [Marginal.linear(0, 1, 0.9)])
    with pytest.raises(DataError):
        AdditiveModel(crit, [Marginal.linear(0, 1, 1.0)], (0.6, 0.4))
    with pytest.raises(DataError):
        AdditiveModel(crit, [Marginal.linear(0, 2, 1.0)])
    with pytest.raises(DataError):
        Marginal(Form.POLYNOMIAL, (0, 1), [(0.2, 0.8)])  # nonzero at the lower bound
    with pytest.raises(DataError):
        Marginal(Form.SPLINE, (0, 1, 1), [(0, 1), (0, 1)])
    with pytest.raises(DataError):
        Marginal(Form.PIECEWISE_LINEAR, (0, 1), [(0, 1, 1)])
    with pytest.raises(DataError):
        CriterionScale("g", 1, 1)


def test_model_invariants_on_a_grid():
    model = spline_model()
    for m in model.marginals:
        xs = np.linspace(m.lower, m.upper, 1000)
        assert np.all(np.diff(m.value(xs)) >= -1e-8)
    assert evaluate_model(model, Alternative("lo", (0, 0))) == pytest.approx(0, abs=1e-6)
    assert evaluate_model(model, Alternative("hi", (2, 2))) == pytest.approx(1, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 2), min_size=2, max_size=2), st.lists(st.floats(0, 2), min_size=2, max_size=2))
def test_dominance(x, delta):
    model = spline_model()
    a = Alternative("a", [min(2.0, xi + abs(d)) for xi, d in zip(x, delta)])
    b = Alternative("b", x)
    assert evaluate_model(model, a) >= evaluate_model(model, b) - 1e-8


def test_model_json_round_trip(tmp_path):
    model = AdditiveModel(spline_model().criteria, spline_model().marginals, (0.2, 0.6))
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    assert back == model
    d = json.loads(path.read_text())
    assert set(d) == {"criteria", "marginals", "thresholds"}
    assert set(d["marginals"][0]) == {"form", "breakpoints", "pieces"}
    path.write_text("{not json")
    with pytest.raises(DataError):
        load_model(path)
    path.write_text('{"criteria": []}')
    with pytest.raises(DataError):
        load_model(path)


def test_csv_round_trip(tmp_path):
    alts = [Alternative("a", (0.1, 2.0)), Alternative("b", (1 / 3, 0.0))]
    path = tmp_path / "alts.csv"
    write_alternatives_csv(path, ["g1", "g2"], alts)
    names, back = read_alternatives_csv(path)
    assert names == ["g1", "g2"]
    assert back == alts
    path.write_text("id,g1\na,1,2\n")
    with pytest.raises(DataError):
        read_alternatives_csv(path)
    path.write_text("id,g1\na,x\n")
    with pytest.raises(DataError):
        read_alternatives_csv(path)
    path.write_text("")
    with pytest.raises(DataError):
        read_alternatives_csv(path)


def test_learning_set_validation():
    crit = [CriterionScale("g", 0, 1)]
    alts = [Alternative("a", (0.2,)), Alternative("b", (0.4,))]
    LearningSet(crit, alts, prefer=[("a", "b")])
    with pytest.raises(DataError):
        LearningSet(crit, alts, prefer=[("a", "z")])
    with pytest.raises(DataError):
        LearningSet(crit, alts, prefer=[("a", "b")], indiff=[("b", "a")])
    with pytest.raises(DataError):
        LearningSet(crit, alts + [Alternative("a", (0.3,))])
    with pytest.raises(DataError):
        LearningSet(crit, alts, prefer=[("a", "b")], assignments={"a": 1})
    with pytest.raises(DataError):
        LearningSet(crit, alts, assignments={"a": 0})
    with pytest.raises(DataError):
        LearningSet(crit, [Alternative("a", (0.2, 0.3))])
    with pytest.raises(DomainError):
        LearningSet(crit, [Alternative("a", (1.5,))])


def test_learning_set_from_dict(tradeoff_set):
    back = learning_set_from_dict(tradeoff_set.to_dict())
    assert back.alternatives == tradeoff_set.alternatives
    assert back.prefer == tradeoff_set.prefer and back.indiff == tradeoff_set.indiff
    assert back.criteria == tradeoff_set.criteria
    assert tradeoff_set.used_ids() == ["a", "c", "d", "b"]
    # without explicit scales the data span is used
    derived = learning_set_from_dict({"prefer": [["a", "c"]]}, tradeoff_set.alternatives, ["g1", "g2"])
    assert derived.criteria == (CriterionScale("g1", 0, 100), CriterionScale("g2", 0, 100))
    s = learning_set_from_dict({"assign": {"a": 2, "b": "1"}}, tradeoff_set.alternatives)
    assert s.sorting and s.assignments == {"a": 2, "b": 1}


def test_scales_from_constant_column():
    sc = scales_from_data(["g"], [Alternative("a", (3.0,)), Alternative("b", (3.0,))])
    assert sc == [CriterionScale("g", 3.0, 4.0)]
