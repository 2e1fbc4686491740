import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpmech.errors import InsufficientBandData, NoModelForBand
from fpmech.model import (
    EtRegressorConfig,
    ExtraTreesForest,
    abs_pearson,
    assign_band,
    fit_band,
    load_models,
    predict,
    predict_rows,
    save_models,
    select_features,
)


@pytest.mark.parametrize("em,band", [
    (509, "GFP_like"), (500, "GFP_like"), (559.9, "GFP_like"), (560, "Excluded"), (575, "Excluded"),
    (580, "Red"), (609.9, "Red"), (610, "FarRed"), (700, "FarRed"), (480, "Excluded"),
])
def test_assign_band(em, band):
    assert assign_band(em) == band


def test_assign_band_rejects_nonpositive():
    with pytest.raises(ValueError):
        assign_band(0)


def test_selection_rules(rng):
    y = rng.normal(size=30)
    X = rng.normal(size=(30, 4))
    X[:, 2] = y
    X[:, 3] = 1.0
    cols = ["a", "b", "c", "d"]
    sel = select_features(X, y, cols, k=4)
    assert sel[0] == "c"
    assert "d" not in sel
    rho = abs_pearson(X, y)
    assert rho[2] == pytest.approx(1.0) and rho[3] == 0.0


def test_selection_tie_goes_to_lexicographic_name(rng):
    y = rng.normal(size=20)
    X = np.column_stack([y, y, -y])
    assert select_features(X, y, ["zz", "aa", "mm"], k=3) == ["aa", "mm", "zz"]


def test_selects_exactly_25_of_52(rng):
    X = rng.normal(size=(50, 52))
    y = rng.normal(size=50)
    sel = select_features(X, y, [f"c{i:02d}" for i in range(52)])
    assert len(sel) == 25 and len(set(sel)) == 25


def test_sign_flip_leaves_selection_unchanged(rng):
    X = rng.normal(size=(40, 10))
    y = X[:, 0] + rng.normal(size=40)
    cols = [f"f{i}" for i in range(10)]
    flipped = X * np.where(rng.random(10) < 0.5, -1.0, 1.0)
    assert select_features(X, y, cols, 5) == select_features(flipped, y, cols, 5)


def test_too_few_rows():
    with pytest.raises(InsufficientBandData):
        select_features(np.ones((2, 3)), np.ones(2), ["a", "b", "c"])
    with pytest.raises(InsufficientBandData):
        fit_band(np.ones((2, 3)), np.ones(2), ["a", "b", "c"], "Red")


def test_constant_target_predicts_constant(rng):
    X = rng.normal(size=(30, 5))
    y = np.full(30, 0.37)
    f = ExtraTreesForest(EtRegressorConfig(n_trees=20)).fit(X, y)
    assert np.all(f.predict(rng.normal(size=(10, 5))) == 0.37)


def test_noiseless_linear_in_sample(rng):
    x = rng.uniform(size=200)
    X = np.column_stack([x, rng.normal(size=(200, 3))])
    y = 2 * x
    m = fit_band(X, y, ["x", "n1", "n2", "n3"], "GFP_like", EtRegressorConfig(n_trees=50))
    assert m.selected[0] == "x"
    pred = predict_rows(m, X, ["x", "n1", "n2", "n3"], clip=False)
    assert np.corrcoef(pred, y)[0, 1] > 0.99


def test_single_tree_memorises(rng):
    X = rng.normal(size=(25, 3))
    y = rng.uniform(size=25)
    f = ExtraTreesForest(EtRegressorConfig(n_trees=1, min_samples_split=2)).fit(X, y)
    assert np.array_equal(f.predict(X), y)


def test_determinism(rng):
    X = rng.normal(size=(60, 6))
    y = rng.normal(size=60)
    Xq = rng.normal(size=(20, 6))  # training rows are memorised by every seed
    a = ExtraTreesForest(EtRegressorConfig(n_trees=30, rng_seed=4)).fit(X, y).predict(Xq)
    b = ExtraTreesForest(EtRegressorConfig(n_trees=30, rng_seed=4)).fit(X, y).predict(Xq)
    c = ExtraTreesForest(EtRegressorConfig(n_trees=30, rng_seed=5)).fit(X, y).predict(Xq)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_prediction_within_training_range(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30, 4))
    y = rng.uniform(-1, 2, size=30)
    f = ExtraTreesForest(EtRegressorConfig(n_trees=15, candidate_features_per_split=2)).fit(X, y)
    p = f.predict(rng.normal(scale=3, size=(50, 4)))
    assert np.all(p >= y.min() - 1e-12) and np.all(p <= y.max() + 1e-12)


def test_clipping(rng):
    X = rng.normal(size=(10, 2))
    m = fit_band(X, np.linspace(1.0, 1.07, 10), ["a", "b"], "Red", EtRegressorConfig(n_trees=5))
    assert predict_rows(m, X, ["a", "b"]).max() == 1.0
    assert predict_rows(m, X, ["a", "b"], clip=False).max() > 1.0


def test_routing_and_missing_band(rng):
    cols = ["a", "b"]
    X = rng.normal(size=(20, 2))
    far = fit_band(X, np.full(20, 0.9), cols, "FarRed", EtRegressorConfig(n_trees=3))
    gfp = fit_band(X, np.full(20, 0.1), cols, "GFP_like", EtRegressorConfig(n_trees=3))
    models = {"FarRed": far, "GFP_like": gfp}
    assert predict(models, X[0], 700.0, cols) == 0.9
    assert predict(models, X[0], 509.0, cols) == 0.1
    with pytest.raises(NoModelForBand):
        predict(models, X[0], 590.0, cols)


def test_save_load_roundtrip(tmp_path, rng):
    cols = [f"c{i}" for i in range(6)]
    X = rng.normal(size=(40, 6))
    y = rng.uniform(size=40)
    models = {"Red": fit_band(X, y, cols, "Red", EtRegressorConfig(n_trees=10, rng_seed=3), k=4)}
    p1, p2 = tmp_path / "a.npz", tmp_path / "b.npz"
    save_models(models, p1, {"note": "x"})
    save_models(models, p2, {"note": "x"})
    assert p1.read_bytes() == p2.read_bytes()
    loaded, extra = load_models(p1)
    assert extra == {"note": "x"}
    assert loaded["Red"].selected == models["Red"].selected
    assert np.array_equal(predict_rows(loaded["Red"], X, cols), predict_rows(models["Red"], X, cols))
    assert np.load(p1)["Red.feature"].dtype == np.int64
