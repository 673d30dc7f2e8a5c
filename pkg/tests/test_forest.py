import numpy as np
import pytest

from pdexplain import ColumnSpec, DataTable, FitError, SchemaError, fit_forest


def table_from(cols, rows):
    return DataTable([ColumnSpec(c, "numeric") for c in cols], rows)


def random_table(seed, n=60, p=3, noise=0.2):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    y = x[:, 0] * 2 - x[:, 1] + rng.standard_normal(n) * noise
    cols = [f"x{j}" for j in range(p)] + ["y"]
    return table_from(cols, np.column_stack([x, y]))


def test_depth_zero_without_bootstrap_is_mean_leaf():
    table = table_from(["x", "y"], [[0, 1], [1, 2], [2, 6]])
    forest = fit_forest(table, "y", b=1, max_depth=0, bootstrap=False)
    assert forest.trees[0].n_nodes == 1
    assert np.array_equal(forest.predict([[0.0], [5.0]]), [3.0, 3.0])


def test_depth_zero_bootstrap_is_constant():
    table = random_table(4)
    forest = fit_forest(table, "y", b=1, max_depth=0, seed=2)
    preds = forest.predict(table.data[:, :3])
    assert np.all(preds == preds[0])


def test_same_seed_bit_identical():
    table = random_table(7)
    a = fit_forest(table, "y", b=12, seed=5)
    b = fit_forest(table, "y", b=12, seed=5)
    assert a.parameters_doc() == b.parameters_doc()


def test_different_seed_differs():
    table = random_table(7)
    a = fit_forest(table, "y", b=5, seed=5)
    b = fit_forest(table, "y", b=5, seed=6)
    assert a.parameters_doc() != b.parameters_doc()


def test_training_r2_on_linear_signal():
    # y = 5*x1 + 3*x2 + eps with unit noise: the signal carries 34/35 of the
    # variance, so a sane forest must explain most of it on the training set
    rng = np.random.default_rng(12)
    n = 2000
    x1, x2 = rng.standard_normal(n), rng.standard_normal(n)
    y = 5 * x1 + 3 * x2 + rng.standard_normal(n)
    table = table_from(["x1", "x2", "y"], np.column_stack([x1, x2, y]))
    forest = fit_forest(table, "y", seed=1)
    preds = forest.predict(table.data[:, :2])
    r2 = 1 - np.mean((y - preds) ** 2) / np.var(y)
    assert r2 > 0.8


def test_forest_prediction_is_mean_of_trees():
    table = random_table(3)
    forest = fit_forest(table, "y", b=17, seed=8)
    rows = table.data[:, :3]
    acc = np.zeros(table.n)
    for tree in forest.trees:
        acc += tree.predict(rows)
    assert np.array_equal(forest.predict(rows), acc / forest.n_trees)


def test_unrestricted_tree_interpolates_distinct_rows():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((40, 2))
    y = rng.standard_normal(40)
    table = table_from(["a", "b", "y"], np.column_stack([x, y]))
    forest = fit_forest(table, "y", b=1, m_try=2, min_leaf=1, bootstrap=False)
    assert np.allclose(forest.predict(x), y, rtol=0, atol=1e-12)


def test_xor_pattern_interpolated():
    # every single-feature split has zero gain at the root; growth must
    # continue through zero-gain splits to reach the pure leaves
    table = table_from(
        ["a", "b", "y"],
        [[0, 0, 0.0], [0, 1, 1.0], [1, 0, 1.0], [1, 1, 0.0]],
    )
    forest = fit_forest(table, "y", b=1, m_try=2, min_leaf=1, bootstrap=False)
    preds = forest.predict(table.data[:, :2])
    assert np.array_equal(preds, [0.0, 1.0, 1.0, 0.0])


def test_categorical_one_vs_rest_split():
    table = DataTable(
        [ColumnSpec("g", "categorical", ("a", "b", "c")), ColumnSpec("y", "numeric")],
        [[0, 1.0], [0, 1.0], [1, 5.0], [1, 5.0], [2, 9.0], [2, 9.0]],
    )
    forest = fit_forest(table, "y", b=1, m_try=1, min_leaf=1, bootstrap=False)
    preds = forest.predict(np.array([[0.0], [1.0], [2.0]]))
    assert np.array_equal(preds, [1.0, 5.0, 9.0])


def test_max_depth_bounds_height():
    table = random_table(2, n=200)
    forest = fit_forest(table, "y", b=3, max_depth=4, min_leaf=1, seed=0)
    assert all(t.height <= 4 for t in forest.trees)


def walk_to_leaf(tree, row):
    node = 0
    while tree.feature[node] >= 0:
        v = row[tree.feature[node]]
        go_left = v <= tree.threshold[node] if tree.kind[node] == 0 else v == tree.threshold[node]
        node = tree.left[node] if go_left else tree.right[node]
    return node


def test_min_leaf_respected():
    table = random_table(6, n=100)
    forest = fit_forest(table, "y", b=1, min_leaf=10, bootstrap=False)
    tree = forest.trees[0]
    counts = np.zeros(tree.n_nodes, dtype=int)
    for row in table.data[:, :3]:
        counts[walk_to_leaf(tree, row)] += 1
    leaf_counts = counts[np.asarray(tree.feature) == -1]
    assert leaf_counts.min() >= 10


def test_non_numeric_target_raises():
    table = DataTable(
        [ColumnSpec("x", "numeric"), ColumnSpec("y", "categorical", ("u", "v"))],
        [[1.0, 0], [2.0, 1], [3.0, 0]],
    )
    with pytest.raises(FitError, match="not numeric"):
        fit_forest(table, "y")


def test_bad_m_try_raises():
    table = random_table(1)
    with pytest.raises(FitError, match="m_try"):
        fit_forest(table, "y", m_try=99)


def test_default_m_try_is_third_of_columns():
    table = random_table(1, p=9)
    forest = fit_forest(table, "y", b=1, seed=0)
    assert forest.m_try == 3


def test_predict_width_mismatch():
    table = random_table(1)
    forest = fit_forest(table, "y", b=2, seed=0)
    with pytest.raises(SchemaError):
        forest.predict(np.zeros((4, 7)))
