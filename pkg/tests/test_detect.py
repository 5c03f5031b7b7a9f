import importlib
import warnings

import numpy as np
import pytest

import oracle
from wgcpd import detect
from wgcpd.distances import Metric
from wgcpd.errors import InputError

# the package re-exports the function under the module's name
detect_module = importlib.import_module("wgcpd.detect")


@pytest.fixture
def shifted():
    rng = np.random.default_rng(3)
    y = rng.standard_normal((80, 2))
    y[30:] += 2.5
    return oracle.sqeuclid(y)


def test_locates_and_rejects(shifted):
    res = detect(shifted, reps=500, seed=1)
    assert abs(res.tau_hat - 30) <= 2
    assert res.p_value == 1 / 501
    assert res.diagnostics["kept_eigenvalues"] >= 1
    assert res.diagnostics["reps"] == 500


def test_seed_is_reproducible(shifted):
    a = detect(shifted, "S3", "permutation", reps=150, seed=8)
    assert a == detect(shifted, "S3", "permutation", reps=150, seed=8)
    assert a.to_dict()["window"] == [0.1, 0.9]


def test_corrected_reports_variant(shifted):
    res = detect(shifted, "S2t", "corrected", variant="main")
    assert res.diagnostics["correction_variant"] == "main"
    assert "mc_stderr" not in res.diagnostics


def test_corrected_needs_scale_statistic(shifted):
    with pytest.raises(InputError):
        detect(shifted, "S1", "corrected")


def test_warns_once_for_deltacon(shifted, monkeypatch):
    monkeypatch.setattr(detect_module, "_warned_not_negative_type", False)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        detect(shifted, reps=100, metric=Metric("deltacon"))
        detect(shifted, reps=100, metric=Metric("deltacon"))
        detect(shifted, "S1", "permutation", reps=100, metric=Metric("deltacon"))
    assert len([w for w in caught if issubclass(w.category, RuntimeWarning)]) == 1


def test_no_warning_for_permutation(shifted, monkeypatch):
    monkeypatch.setattr(detect_module, "_warned_not_negative_type", False)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        detect(shifted, "S1", "permutation", reps=100, metric=Metric("deltacon"))
