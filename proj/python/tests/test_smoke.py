import json

import numpy as np
import pytest

import lrgda


def two_blobs(seed=0, n=200, d=4):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, d)) + 3.0
    b = rng.normal(size=(n, d)) - 3.0
    x = np.vstack([a, b])
    y = [0] * n + [1] * n
    return x, y


def test_accumulate_matches_numpy():
    x, y = two_blobs()
    reg = lrgda.StatsRegistry(4)
    reg.accumulate(x, y)
    assert reg.class_ids == [0, 1]
    xa = x[:200]
    np.testing.assert_allclose(reg.mean(0), xa.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(reg.covariance(0), np.cov(xa.T, bias=True), atol=1e-10)
    assert reg.count(0) == 200


def test_stats_bytes_roundtrip():
    x, y = two_blobs()
    reg = lrgda.StatsRegistry(4)
    reg.accumulate(x, y)
    back = lrgda.StatsRegistry.from_bytes(reg.to_bytes())
    np.testing.assert_array_equal(back.covariance(1), reg.covariance(1))


def test_classifiers_separate_blobs():
    x, y = two_blobs()
    reg = lrgda.StatsRegistry(4)
    reg.accumulate(x, y)
    params = lrgda.RegularizationParams(rank=2)
    for clf in (lrgda.build_lda(reg), lrgda.build_rgda(reg, params), lrgda.build_lr_rgda(reg, params)):
        assert list(clf.predict(x)) == y


def test_woodbury_against_numpy():
    rng = np.random.default_rng(1)
    d, r = 12, 3
    a = rng.normal(size=(d, d))
    b = a @ a.T + d * np.eye(d)
    u = rng.normal(size=(d, r))
    inv, m_inv, m = lrgda.woodbury_inverse(np.linalg.inv(b), u)
    np.testing.assert_allclose(inv @ (b + u @ u.T), np.eye(d), atol=1e-10)
    _, logdet = np.linalg.slogdet(b + u @ u.T)
    _, logdet_b = np.linalg.slogdet(b)
    assert lrgda.log_det_lemma(logdet_b, m) == pytest.approx(logdet, abs=1e-10)


def test_topk_softmax_example():
    w = lrgda.topk_softmax(np.array([[1.0, 2.0, 3.0]]), 1.0, 2)
    e2, e3 = np.exp(2.0), np.exp(3.0)
    np.testing.assert_allclose(w[0], [0.0, e2 / (e2 + e3), e3 / (e2 + e3)], atol=1e-12)


def test_energy_single_pattern():
    k = np.array([[1.0, 0.0, 0.0]])
    assert lrgda.hopfield_energy(np.array([1.0, 0.0, 0.0]), k, 1.0) == pytest.approx(0.0, abs=1e-15)


def test_constant_drift_is_recovered():
    rng = np.random.default_rng(2)
    f_old = rng.normal(size=(64, 5))
    v = np.array([0.5, -1.0, 0.0, 2.0, 0.25])
    est = lrgda.estimate_drift(f_old, f_old + v, rng.normal(size=(10, 5)))
    np.testing.assert_allclose(est, np.tile(v, (10, 1)), atol=1e-12)


def test_storage_layout_lda():
    rep = lrgda.storage_layout("lda", 10, 8)
    assert rep["shared_precision"] == 8 * 8 * 8
    assert rep["per_class_bytes"] == 10 * (8 + 1) * 8


def test_bad_input_raises_value_error():
    reg = lrgda.StatsRegistry(3)
    with pytest.raises(ValueError):
        reg.accumulate(np.zeros((2, 4)), [0, 1])


def test_simulate_is_deterministic():
    spec = {"tasks": "2", "classes_per_task": "3", "dim": "6", "train_per_class": "40",
            "test_per_class": "40", "anchors": "64"}
    a = lrgda.simulate(spec, classifier="lda", seed=5)
    b = lrgda.simulate(spec, classifier="lda", seed=5)
    assert a == b
    report = json.loads(a)
    assert len(report["runs"][0]["per_task"]) == 2
