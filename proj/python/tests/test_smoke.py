import math

import numpy as np
import pytest

import fwfm


@pytest.fixture(scope="module")
def planted():
    spec = fwfm.make_planted(n_fields=5, features_per_field=6, n_samples=20000, seed=3)
    data = spec.generate()
    train, valid, test = fwfm.split(data, [60, 20, 20], seed=3)
    return spec, train, valid, test


def test_generate_and_split(planted):
    spec, train, valid, test = planted
    assert len(train) + len(valid) + len(test) == 20000
    assert train.n_fields == 5
    assert spec.r_star.shape == (5, 5)
    assert set(np.unique(train.labels)) == {-1, 1}


def test_metrics():
    assert fwfm.auc([0.9, 0.1], [1, -1]) == 1.0
    assert fwfm.logloss([0.5] * 4, [1, -1, 1, -1]) == pytest.approx(math.log(2))
    with pytest.raises(fwfm.UndefinedMetricError):
        fwfm.auc([0.1, 0.2], [1, 1])


def test_train_fwfm_recovers_r(planted, tmp_path):
    spec, train, valid, test = planted
    model, report = fwfm.train("fwfm-lw", train, valid, {"k": 4, "eta": 0.01, "epochs": 4, "lambda": 0})
    assert model.kind == "fwfm-lw"
    assert len(report["epochs"]) == 4
    assert model.evaluate(test)["auc"] > 0.7
    assert fwfm.pearson_upper(np.abs(model.r()), np.abs(spec.r_star)) > 0.8

    path = tmp_path / "m.bin"
    model.save(str(path))
    again = fwfm.Model.load(str(path))
    assert again.to_bytes() == model.to_bytes()
    probs = model.predict(test)
    assert probs.shape == (len(test),)
    np.testing.assert_array_equal(again.predict(test), probs)


def test_field_statistics(planted):
    _, train, valid, _ = planted
    mi = fwfm.mutual_information(train)
    assert mi.shape == (5, 5)
    assert np.allclose(mi, mi.T)
    assert np.all(np.diag(mi) == 0)
    model, _ = fwfm.train("fm", train, valid, {"k": 4, "eta": 0.01, "epochs": 2})
    strength = fwfm.learned_strength(model, train)
    assert strength.shape == (5, 5)
    assert np.all(strength >= 0)


def test_errors_are_typed(planted):
    _, train, valid, _ = planted
    with pytest.raises(fwfm.ConfigError):
        fwfm.train("svm", train, valid)
    with pytest.raises(fwfm.ConfigError):
        fwfm.train("fm", train, valid, {"eta": -1})
    with pytest.raises(fwfm.Error):
        fwfm.load_libffm("/nonexistent/data.ffm")


def test_libffm_round_trip_and_filter(planted, tmp_path):
    _, train, valid, _ = planted
    path = tmp_path / "t.ffm"
    train.save(str(path))
    back = fwfm.load_libffm(str(path))
    assert len(back) == len(train)
    assert back.positives == train.positives
    filt = fwfm.FrequencyFilter.fit(back, 1000000)
    folded = filt.apply(back)
    assert len(folded) == len(back)
    assert folded.n_features == back.n_fields  # only NULL features survive


def test_cli_in_process(tmp_path):
    out = tmp_path / "s.ffm"
    code, stdout, _ = fwfm.run_cli(["synth", "--samples", "50", "--out", str(out)])
    assert code == 0 and "50 instances" in stdout
    code, _, _ = fwfm.run_cli(["train"])
    assert code == 2
