import numpy as np
import pytest

from batterylife import forest
from batterylife.errors import DimensionMismatch, InsufficientData, InvalidConfig, NoValidSplit

from oracles import exhaustive_split, oracle_predict, oracle_tree

SINGLE = dict(n_trees=1, bootstrap=False, feature_subsample=None)


def test_best_split_step():
    X = np.array([[0.0], [1], [2], [3]])
    s = forest.best_split(X, [0, 0, 10, 10])
    assert (s.feature, s.threshold) == (0, 1.5)
    assert s.gain == pytest.approx(25.0)


def test_best_split_constant_target():
    with pytest.raises(NoValidSplit):
        forest.best_split(np.arange(6.0)[:, None], np.full(6, 3.0))


def test_best_split_picks_separating_feature():
    rng = np.random.default_rng(2)
    noise = rng.standard_normal(20)
    sep = np.r_[rng.uniform(0, 1, 10), rng.uniform(2, 3, 10)]
    y = np.r_[np.zeros(10), np.ones(10)]
    X = np.column_stack([noise, sep])
    s = forest.best_split(X, y)
    _, chosen = exhaustive_split(X, y, [0, 1], 1)
    assert s.feature == chosen[0] == 1
    assert s.threshold == chosen[1]


def test_best_split_tie_goes_to_lowest_feature():
    x = np.arange(8.0)
    y = (x > 3).astype(float)
    s = forest.best_split(np.column_stack([x, x]), y)
    assert s.feature == 0
    s = forest.best_split(np.column_stack([x, x]), y, candidate_features=[1])
    assert s.feature == 1


def test_best_split_matches_oracle_with_leaf_limits():
    rng = np.random.default_rng(8)
    for trial in range(30):
        n = int(rng.integers(4, 40))
        X = np.round(rng.uniform(0, 5, (n, 3)), 1 if trial % 2 else 6)
        y = rng.standard_normal(n)
        leaf = int(rng.integers(1, 4))
        _, chosen = exhaustive_split(X, y, range(3), leaf)
        if chosen is None:
            with pytest.raises(NoValidSplit):
                forest.best_split(X, y, min_samples_leaf=leaf)
            continue
        s = forest.best_split(X, y, min_samples_leaf=leaf)
        assert (s.feature, s.threshold) == chosen[:2]
        assert s.gain == pytest.approx(chosen[2], rel=1e-9)


def test_single_tree_matches_oracle():
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 10, (50, 2))
    y = np.sin(X[:, 0]) + 0.1 * X[:, 1]
    model = forest.fit_forest(X, y, forest.ForestConfig(max_depth=6, min_samples_leaf=2, **SINGLE))
    tree = oracle_tree(X, y, 6, 2)
    grid = rng.uniform(-1, 11, (200, 2))
    np.testing.assert_array_equal(forest.predict_forest(model, grid), oracle_predict(tree, grid))


def test_constant_target_exact():
    X = np.random.default_rng(0).standard_normal((60, 2))
    model = forest.fit_forest(X, np.full(60, 7.25), forest.ForestConfig(n_trees=5))
    np.testing.assert_array_equal(forest.predict_forest(model, X), 7.25)


def _leaf(value):
    return forest.RegressionTree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
                                 np.array([value]), np.array([1]))


def test_mean_of_trees():
    cfg = forest.ForestConfig(n_trees=3)
    m = forest.ForestModel(cfg, [_leaf(5.0)] * 3, 1, (0.0, 10.0))
    np.testing.assert_array_equal(forest.predict_forest(m, [[1.0]]), [5.0])
    m = forest.ForestModel(cfg, [_leaf(4.0), _leaf(6.0)], 1, (0.0, 10.0))
    np.testing.assert_array_equal(forest.predict_forest(m, [[1.0]]), [5.0])


def test_identical_trees_average_exactly():
    # without bootstrap or subsampling every tree is the same tree
    rng = np.random.default_rng(6)
    X = rng.standard_normal((80, 2))
    y = rng.uniform(0, 1e4, 80)
    one = forest.fit_forest(X, y, forest.ForestConfig(**SINGLE))
    many = forest.fit_forest(X, y, forest.ForestConfig(n_trees=7, bootstrap=False))
    np.testing.assert_array_equal(forest.predict_forest(many, X), forest.predict_forest(one, X))


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((400, 3))
    y = X[:, 0] ** 2 + X[:, 1] + 0.1 * rng.standard_normal(400)
    return X, y


def test_predictions_within_target_range(data):
    X, y = data
    m = forest.fit_forest(X, y, forest.ForestConfig(n_trees=20, feature_subsample=2, seed=4))
    p = forest.predict_forest(m, np.random.default_rng(1).standard_normal((500, 3)) * 5)
    assert p.min() >= y.min() and p.max() <= y.max()


def test_determinism_and_threads(data):
    X, y = data
    cfg = forest.ForestConfig(n_trees=12, feature_subsample=2, seed=123)
    a = forest.fit_forest(X, y, cfg)
    b = forest.fit_forest(X, y, cfg)
    c = forest.fit_forest(X, y, cfg, n_jobs=3)
    pa = forest.predict_forest(a, X)
    assert pa.tobytes() == forest.predict_forest(b, X).tobytes()
    assert pa.tobytes() == forest.predict_forest(c, X).tobytes()
    for ta, tc in zip(a.trees, c.trees):
        np.testing.assert_array_equal(ta.threshold, tc.threshold)
        np.testing.assert_array_equal(ta.value, tc.value)
    other = forest.fit_forest(X, y, forest.ForestConfig(n_trees=12, feature_subsample=2, seed=124))
    assert not np.array_equal(pa, forest.predict_forest(other, X))


def test_structure_limits(data):
    X, y = data
    m = forest.fit_forest(X, y, forest.ForestConfig(n_trees=4, max_depth=3, min_samples_leaf=7))
    for t in m.trees:
        assert t.depth() <= 3
        leaves = t.feature < 0
        assert t.n_samples[leaves].min() >= 7
        assert t.n_samples[leaves].sum() == len(y)


def test_json_round_trip(tmp_path, data):
    X, y = data
    m = forest.fit_forest(X, y, forest.ForestConfig(n_trees=3, seed=9))
    forest.save_model(m, tmp_path / "rf.json")
    back = forest.load_model(tmp_path / "rf.json")
    np.testing.assert_array_equal(forest.predict_forest(back, X), forest.predict_forest(m, X))
    assert back.config == m.config


def test_errors(data):
    X, y = data
    with pytest.raises(InvalidConfig):
        forest.fit_forest(X, y, forest.ForestConfig(feature_subsample=4))
    with pytest.raises(InvalidConfig):
        forest.fit_forest(X, y, forest.ForestConfig(n_trees=0))
    with pytest.raises(InsufficientData):
        forest.fit_forest(X[:3], y[:3], forest.ForestConfig(min_samples_leaf=2))
    m = forest.fit_forest(X, y, forest.ForestConfig(n_trees=1))
    with pytest.raises(DimensionMismatch):
        forest.predict_forest(m, X[:, :2])
