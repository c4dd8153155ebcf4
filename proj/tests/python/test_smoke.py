"""End-to-end smoke tests for the Python bindings."""

import math

import numpy as np
import pytest

import shoulderseg as ss


def test_phantom_shapes_and_ranges():
    image, labels = ss.generate_phantom(dims=(48, 48, 32), seed=3)
    assert image.shape == (32, 48, 48)
    assert labels.shape == (32, 48, 48)
    assert image.dtype == np.float32
    assert labels.dtype == np.uint8
    assert 0.0 <= image.min() and image.max() <= 1.0
    # Both structures are present and the scene is mostly background.
    counts = np.bincount(labels.ravel(), minlength=3)
    assert counts[1] > 100 and counts[2] > 100
    assert counts[0] > counts[1] + counts[2]

    # Determinism in the seed.
    image2, labels2 = ss.generate_phantom(dims=(48, 48, 32), seed=3)
    assert np.array_equal(image, image2)
    assert np.array_equal(labels, labels2)


def test_corruption_perturbs_labels():
    _, labels = ss.generate_phantom(seed=5)
    corrupted = ss.corrupt_labels(labels, severity=0.5, seed=5)
    assert corrupted.shape == labels.shape
    assert (corrupted != labels).sum() > 0
    identity = ss.corrupt_labels(labels, severity=0.0, seed=5)
    assert np.array_equal(identity, labels)


def test_evaluate_self_comparison_is_perfect():
    _, labels = ss.generate_phantom(seed=11)
    report = ss.evaluate(labels, labels)
    for target in ("humerus", "scapula", "both"):
        assert report[target]["dsc"]["value"] == 1.0
        assert report[target]["dsc"]["defined"]
        assert report[target]["hd"]["value"] == 0.0
        assert report[target]["asd"]["value"] == 0.0


def test_preprocess_matches_protocol_grid():
    image, _ = ss.generate_phantom(dims=(64, 60, 40), spacing=(0.9, 1.1, 2.0), seed=2)
    out = ss.preprocess_image(image, spacing=(0.9, 1.1, 2.0))
    assert out.shape == (80, 144, 144)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_split_kfold_partitions():
    assignment = ss.split_kfold(50, 5, seed=1)
    assert len(assignment) == 50
    counts = np.bincount(assignment, minlength=5)
    assert list(counts) == [10] * 5


def test_train_predict_roundtrip(tmp_path):
    image, labels = ss.generate_phantom(seed=4)
    model = ss.Model(base_channels=1, seed=4)
    log = model.train([image], [labels], epochs=2, seed=4)
    assert len(log) == 2
    epoch0, lr0, loss0 = log[0]
    assert epoch0 == 0 and lr0 == pytest.approx(0.001)
    # The first step starts from the uniform prediction.
    assert loss0 == pytest.approx(math.log(3.0), abs=1e-9)
    assert log[1][2] < loss0

    probs = model.predict_probabilities(image)
    assert probs.shape == (3, 32, 48, 48)
    np.testing.assert_allclose(probs.sum(axis=0), 1.0, atol=1e-9)
    pred = model.predict_labels(image)
    assert pred.shape == labels.shape

    path = tmp_path / "model.ckpt"
    model.save(path)
    loaded = ss.Model.load(path)
    assert loaded.base_channels == 1
    assert np.array_equal(loaded.predict_labels(image), pred)


def test_self_train_rounds_and_manifests():
    image, labels = ss.generate_phantom(seed=6)
    corrupted = ss.corrupt_labels(labels, severity=0.5, seed=6)
    models, logs, manifests = ss.self_train(
        [image], [corrupted], base_channels=1, epochs=1, seed=6,
        rounds=1, augment_copies=1,
    )
    assert len(models) == 2 and len(logs) == 2 and len(manifests) == 2
    assert [m.round for m in models] == [0, 1]
    assert manifests[0] == [("case0", "GT")]
    assert [prov for _, prov in manifests[1]] == ["GT", "pseudo", "augmented"]


def test_shape_error_surfaces_as_python_exception():
    model = ss.Model(base_channels=1)
    bad = np.zeros((7, 8, 8), dtype=np.float32)  # z axis not divisible by 4
    with pytest.raises(ss.SsegError):
        model.predict_labels(bad)
