import csv
import io
import math

import numpy as np
import pytest

import polyuta.synth as synth
from _sets import pooled_se
from polyuta.errors import SpecError
from polyuta.learn import FitSpec, problem_size
from polyuta.polysos import check_nonneg_on_interval, poly_derivative
from polyuta.synth import (
    CSV_FIELDS,
    ExperimentConfig,
    FamilyMarginal,
    GroundTruthModel,
    bernstein_to_monomial,
    grid_configs,
    model_zoo,
    results_csv,
    results_json,
    run_experiment,
    summarize,
    sweep,
    zoo_ids,
)


def test_zoo_shapes():
    assert zoo_ids() == list(range(1, 9))
    for i in zoo_ids():
        z = model_zoo(i)
        assert z.n == (3 if i <= 4 else 5)
        assert len(set(z.families)) >= 2
        assert z.scores(np.ones((1, z.n)))[0] == pytest.approx(1.0, abs=1e-12)
        assert z.scores(np.zeros((1, z.n)))[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(SpecError):
        model_zoo(9)


def test_zoo_marginals_monotone():
    xs = np.linspace(0, 1, 2001)
    families = set()
    for i in zoo_ids():
        for m in model_zoo(i).marginals:
            families.add(m.family)
            assert np.all(np.diff(m(xs)) >= -1e-12), (i, m.family)
            assert m(0.0) == pytest.approx(0.0, abs=1e-12)
            assert m(1.0) == pytest.approx(m.weight, abs=1e-12)
            coeffs = m.monomial()
            if coeffs is not None:
                assert check_nonneg_on_interval(poly_derivative(coeffs), 0.0, 1.0, tol=1e-9)
    assert families == {"sigmoid", "exponential", "polynomial", "piecewise_linear", "bernstein"}


def test_bernstein_conversion():
    controls = model_zoo(3).marginals[0].params["controls"]
    xs = np.linspace(0, 1, 101)
    direct = model_zoo(3).marginals[0].shape()(xs)
    via_monomial = np.polynomial.polynomial.polyval(xs, bernstein_to_monomial(controls))
    np.testing.assert_allclose(via_monomial, direct, atol=1e-9)
    assert len(bernstein_to_monomial(controls)) == 16
    np.testing.assert_allclose(bernstein_to_monomial([0, 1]), [0, 1])


def test_config_validation():
    with pytest.raises(SpecError):
        ExperimentConfig(1, 0, 1, FitSpec.linear(1)).validate()
    with pytest.raises(SpecError):
        ExperimentConfig(1, 0, 20, FitSpec.linear(1), m=10).validate()
    with pytest.raises(SpecError):
        ExperimentConfig(1, -1, 20, FitSpec.linear(1)).validate()
    with pytest.raises(SpecError):
        run_experiment(ExperimentConfig(1, 0, 20, FitSpec.poly(2, "global")))


def test_two_alternatives_need_no_slack():
    for spec in (FitSpec.linear(1), FitSpec.poly(3), FitSpec.spline(3, 2)):
        r = run_experiment(ExperimentConfig(2, 4, 2, spec, m=50))
        assert r.ok and r.slack <= 1e-6


def test_reproducible():
    cfg = ExperimentConfig(3, 7, 30, FitSpec.spline(2, 2), m=200)
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert (a.kendall, a.spearman, a.slack) == (b.kendall, b.spearman, b.slack)


def test_test_set_independent_of_spec_and_mstar():
    draws = []
    for mstar in (10, 40):
        for spec in (FitSpec.linear(1), FitSpec.poly(3)):
            _, test_rng = ExperimentConfig(1, 3, mstar, spec).streams()
            draws.append(test_rng.random((5, 3)))
    for d in draws[1:]:
        np.testing.assert_array_equal(d, draws[0])
    learn_rng, test_rng = ExperimentConfig(1, 3, 10, FitSpec.linear(1)).streams()
    assert not np.array_equal(learn_rng.random(4), test_rng.random(4))


def test_sizes_follow_problem_size():
    configs = grid_configs([1, 6], [0], [10], [FitSpec.linear(2), FitSpec.spline(3, 2, 1)], m=50)
    for cfg, r in zip(configs, sweep(configs)):
        assert (r.constraints, r.variables) == problem_size(
            cfg.mstar, model_zoo(cfg.model_id).n, cfg.spec.pieces, cfg.spec.degree, cfg.spec.continuity
        )


def test_metrics_in_range():
    r = run_experiment(ExperimentConfig(5, 1, 30, FitSpec.poly(3), m=300))
    assert -1 <= r.kendall <= 1 and -1 <= r.spearman <= 1
    assert r.kendall > 0.5


def test_recovers_a_cubic_decision_maker(monkeypatch):
    # ground truth inside the fitted family: the ranking should come back almost exactly
    truth = GroundTruthModel(
        99,
        (
            FamilyMarginal("polynomial", 0.5, {"coeffs": [0, 1.5, -1.2, 0.7]}),
            FamilyMarginal("polynomial", 0.3, {"coeffs": [0, 0.2, 1.6, -0.8]}),
            FamilyMarginal("polynomial", 0.2, {"coeffs": [0, 0.4, 0.6]}),
        ),
    )
    monkeypatch.setattr(synth, "model_zoo", lambda _id: truth)
    taus = [run_experiment(ExperimentConfig(99, s, 200, FitSpec.poly(3), m=500)).kendall for s in range(5)]
    assert np.mean(taus) >= 0.95, taus


def test_kendall_grows_with_degree():
    specs = [FitSpec.poly(d) for d in (1, 2, 3, 4)]
    res = sweep(grid_configs([1], range(10), [100], specs, m=1000))
    taus = [[r.kendall for r in res if r.D == d] for d in (1, 2, 3, 4)]
    means = [np.mean(t) for t in taus]
    for lo, hi in zip(taus, taus[1:]):
        assert np.mean(hi) >= np.mean(lo) - pooled_se(lo, hi), means


def test_failed_cells_are_recorded():
    bad = ExperimentConfig(1, 0, 1, FitSpec.linear(1))
    good = ExperimentConfig(1, 0, 5, FitSpec.linear(1), m=20)
    out = sweep([bad, good])
    assert out[0].status.startswith("error: SpecError")
    assert math.isnan(out[0].kendall)
    assert out[1].ok
    assert sweep([]) == []
    assert results_csv([]) == ",".join(CSV_FIELDS) + "\n"
    rows = summarize(out, by=("form",))
    assert rows[0]["cells"] == 2 and rows[0]["failed"] == 1
    assert math.isnan(rows[0]["kendall_std"])


def test_parallel_sweep_matches_serial():
    configs = grid_configs([1], [0, 1], [8], [FitSpec.poly(3)], m=50)
    a = results_csv(sweep(configs), timing=False)
    b = results_csv(sweep(configs, workers=2), timing=False)
    assert a == b


def test_outputs():
    configs = grid_configs([1, 2], [0, 1], [10], [FitSpec.linear(1)], m=50)
    assert [(c.model_id, c.seed) for c in configs] == [(1, 0), (1, 1), (2, 0), (2, 1)]
    res = sweep(configs)
    rows = list(csv.DictReader(io.StringIO(results_csv(res))))
    assert list(rows[0]) == CSV_FIELDS
    assert len(rows) == 4 and rows[0]["form"] == "linear"
    assert all(r["seconds"] == "" for r in csv.DictReader(io.StringIO(results_csv(res, timing=False))))
    assert "seconds" not in results_json(res, timing=False)
    pooled = summarize(res, by=("form", "mstar"))
    assert len(pooled) == 1 and pooled[0]["cells"] == 4
    per_model = summarize(res)
    assert len(per_model) == 2
    assert per_model[0]["kendall_mean"] == pytest.approx(np.mean([r.kendall for r in res[:2]]))


def test_kendall_grows_with_pieces():
    specs = [FitSpec.spline(3, k, 2) for k in (1, 2, 3, 4, 5)]
    res = sweep(grid_configs([1, 2], range(5), [100], specs, m=1000))
    taus = [[r.kendall for r in res if r.k == k] for k in (1, 2, 3, 4, 5)]
    means = [np.mean(t) for t in taus]
    for lo, hi in zip(taus, taus[1:]):
        assert np.mean(hi) >= np.mean(lo) - pooled_se(lo, hi), means
    assert means[-1] > means[0]


def test_kendall_grows_with_learning_set_size():
    res = sweep(grid_configs([1, 2], range(5), [10, 50, 100], [FitSpec.poly(3)], m=1000))
    means = [np.mean([r.kendall for r in res if r.mstar == ms]) for ms in (10, 50, 100)]
    assert means[0] < means[1] < means[2], means
