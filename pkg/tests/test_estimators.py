import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import make_scene
from gnsslearn.errors import ConfigInvalid
from gnsslearn.estimators import TdlPositioner, WlsPositioner
from gnsslearn.network import MlpModel
from gnsslearn.simulate import ScenarioConfig, generate_dataset


@pytest.fixture(scope="module")
def data():
    train_set = generate_dataset(ScenarioConfig(seed=51, epochs=40, nlos_fraction=0.4, noise_sigma=1.0))
    test_set = generate_dataset(ScenarioConfig(seed=52, epochs=15, nlos_fraction=0.4, noise_sigma=1.0))
    return train_set, test_set


def test_wls_positioner_sklearn_contract(data):
    _, test_set = data
    est = WlsPositioner(method="rtklib", elevation_mask=0.1)
    params = est.get_params()
    assert params["method"] == "rtklib"
    cloned = clone(est)
    assert cloned.get_params() == params
    est.set_params(method="equal")
    assert est.method == "equal"

    with pytest.raises(NotFittedError):
        est.predict(test_set)

    out = est.fit(test_set).predict(test_set)
    assert out.shape == (len(test_set), 3)
    for i, epoch in enumerate(test_set):
        assert np.linalg.norm(out[i] - epoch.truth_pos.to_array()) < 100.0


def test_wls_positioner_rejects_unknown_method(data):
    _, test_set = data
    with pytest.raises(ConfigInvalid):
        WlsPositioner(method="tdl-b").fit(test_set)


def test_wls_positioner_nan_for_unsolvable():
    est = WlsPositioner().fit([make_scene(seed=0, n_sats=8)])
    out = est.predict([make_scene(seed=1, n_sats=8), make_scene(seed=2, n_sats=3)])
    assert np.isfinite(out[0]).all()
    assert np.isnan(out[1]).all()


def test_tdl_positioner_fit_predict(data):
    train_set, test_set = data
    est = TdlPositioner(mode="tdl-b", epochs_count=8, seed=0)
    assert clone(est).get_params() == est.get_params()
    est.fit(train_set)
    assert est.model_.architecture == "bias"
    assert len(est.training_log_.losses) == 8
    out = est.predict(test_set)
    assert out.shape == (len(test_set), 3)

    baseline = WlsPositioner(method="equal").fit(train_set).predict(test_set)
    err_tdl = np.linalg.norm(out - [e.truth_pos.to_array() for e in test_set], axis=1)
    err_eq = np.linalg.norm(baseline - [e.truth_pos.to_array() for e in test_set], axis=1)
    assert err_tdl.mean() < err_eq.mean()


def test_tdl_positioner_requires_truth_for_fit(data):
    import dataclasses

    _, test_set = data
    stripped = [dataclasses.replace(e, truth_pos=None) for e in test_set]
    with pytest.raises(ValueError):
        TdlPositioner(mode="tdl-b", epochs_count=1).fit(stripped)


def test_tdl_positioner_adopts_pretrained_model(data):
    _, test_set = data
    est = TdlPositioner(mode="tdl-w").set_model(MlpModel.create("weight", seed=1))
    out = est.predict(test_set)
    assert out.shape == (len(test_set), 3)
    with pytest.raises(ConfigInvalid):
        TdlPositioner(mode="tdl-b").set_model(MlpModel.create("joint", seed=1))


def test_tdl_positioner_mode_validation(data):
    train_set, _ = data
    with pytest.raises(ConfigInvalid):
        TdlPositioner(mode="equal", epochs_count=1).fit(train_set)
