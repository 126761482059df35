import itertools

import numpy as np
import pytest

from comfortgan import baselines as bl
from comfortgan import encode as enc
from comfortgan import evaluation as ev
from comfortgan.dataio import train_test_split
from comfortgan.forest import ForestConfig
from comfortgan.toy import gaussian_mixture

FAST = ForestConfig(n_trees=5, max_depth=4)


@pytest.fixture(scope="module")
def toy_split():
    ds = gaussian_mixture(n=240, seed=1)
    train, test = train_test_split(ds, 0.7, seed=0)
    return train, test, enc.fit(train)


def test_variability_constant_source_is_zero():
    assert ev.variability({0: np.ones((5, 3)), 1: np.zeros((2, 3))}, 30, rng=0) == 0.0


def test_variability_two_point_expectation():
    v, w = np.array([0.0, 0.0]), np.array([3.0, 4.0])
    # four equally likely ordered pairs, two of them at distance 5
    exact = np.mean([np.linalg.norm(a - b) for a, b in itertools.product([v, w], repeat=2)])
    assert exact == 2.5
    est = ev.variability({0: np.stack([v, w])}, draws_per_class=20_000, rng=0)
    assert est == pytest.approx(exact, abs=0.05)
    with pytest.raises(ValueError):
        ev.variability({0: v[None]})


def test_diversity_examples():
    assert ev.diversity({0: np.array([[3.0, 4.0]])}, np.zeros((1, 2)), 10, rng=0) == 5.0
    train = np.random.default_rng(0).standard_normal((20, 3))
    assert ev.diversity({0: train[:5], 1: train[5:9]}, train, 30, rng=0) == 0.0
    with pytest.raises(ValueError):
        ev.diversity({0: np.empty((0, 3))}, train)


def test_diversity_self_exclusion():
    train = np.array([[0.0], [1.0], [3.0]])
    by_class = {0: train}
    index = {0: np.arange(3)}
    # nearest other row: 1, 1, 2 -> all three draws land on some row
    got = ev.diversity(by_class, train, 3000, rng=0, self_index=index)
    assert got == pytest.approx(4 / 3, abs=0.05)


def test_identity_equals_baseline_bit_exact(toy_split):
    train, test, codec = toy_split
    base = ev.evaluate_augmenter("baseline", None, train, test, codec, repetitions=3, forest_config=FAST, seed=4)
    same = ev.evaluate_augmenter("identity", ev.identity_augmenter, train, test, codec, repetitions=3, forest_config=FAST, seed=4)
    assert same.per_repetition["efficacy"] == base.per_repetition["efficacy"]
    assert same.variability is None


def test_report_is_self_consistent(toy_split):
    train, test, codec = toy_split
    smote = lambda ds, seed: bl.oversample(ds, codec, "smote", bl.OversamplerConfig(seed=seed))
    reports = ev.compare(train, test, codec, {"smote": smote}, repetitions=3, forest_config=FAST, seed=1)
    assert [r.augmenter for r in reports] == ["baseline", "smote"]
    for r in reports:
        assert r.efficacy == pytest.approx(np.mean(r.per_repetition["efficacy"]))
        assert r.variability == pytest.approx(np.mean(r.per_repetition["variability"]))
        assert 0 <= r.efficacy <= 1 and r.diversity >= 0
        assert r.baseline["efficacy"] == reports[0].efficacy
    assert reports[1].per_repetition["variability"][0] != reports[1].per_repetition["variability"][1]


def test_mode_collapse_flag(toy_split):
    train, test, codec = toy_split

    def collapsed(ds, seed):
        def same_row(ds_, c, n):
            return ds_.take([int(np.flatnonzero(ds_.labels == c)[0])] * n).with_origin("stuck")

        from comfortgan.gan import balance_with

        return balance_with(ds, lambda c, n: same_row(ds, c, n))

    reports = ev.compare(train, test, codec, {"stuck": collapsed}, repetitions=2, forest_config=FAST)
    assert reports[1].variability == 0.0 and reports[1].mode_collapse
    assert not reports[0].mode_collapse
    assert "[mode collapse]" in ev.render_table(reports)


def test_table_and_json(tmp_path, toy_split):
    train, test, codec = toy_split
    reports = ev.compare(train, test, codec, {"identity": ev.identity_augmenter}, repetitions=2, forest_config=FAST)
    reports[1].efficacy = reports[0].efficacy + 0.02
    table = ev.render_table(reports)
    assert "Variability" in table and "(+2%)" in table
    ev.save_reports(reports, tmp_path / "r.json")
    assert [r.to_dict() for r in ev.load_reports(tmp_path / "r.json")] == [r.to_dict() for r in reports]


def test_parallel_matches_serial(toy_split):
    train, test, codec = toy_split
    a = ev.evaluate_augmenter("baseline", None, train, test, codec, repetitions=2, forest_config=FAST, jobs=1)
    b = ev.evaluate_augmenter("baseline", None, train, test, codec, repetitions=2, forest_config=FAST, jobs=2)
    assert a.per_repetition == b.per_repetition
