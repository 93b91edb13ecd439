"""Smoke tests for the python module: end-to-end pipeline plus a few exact
values mirrored from the C++ suites."""

import json
import math

import pytest

import sianms


@pytest.fixture(scope="module")
def scene():
    cfg = sianms.SimConfig()
    cfg.seed = 11
    cfg.n_frames = 12
    return sianms.generate_scene(cfg)


@pytest.fixture(scope="module")
def encoder(scene):
    enc, curve = sianms.train_encoder([scene], epochs=12, seed=4)
    assert curve[-1] < curve[0]
    return enc


def test_iou_values():
    a = sianms.Box3D(center=(0, 0, 0.85), size=(2, 2, 1.7), yaw=0.0, score=1.0)
    b = sianms.Box3D(center=(1, 0, 0.85), size=(2, 2, 1.7), yaw=0.0, score=1.0)
    assert sianms.iou_axis_aligned_bev(a, b) == pytest.approx(1 / 3)

    unit = sianms.Box3D(center=(0, 0, 0), size=(1, 1, 1), yaw=0.0, score=1.0)
    turned = sianms.Box3D(center=(0, 0, 0), size=(1, 1, 1), yaw=math.pi / 4, score=1.0)
    inter = 2 * (math.sqrt(2) - 1)
    assert sianms.iou_rotated_bev(unit, turned) == pytest.approx(
        inter / (2 - inter), abs=1e-9
    )


def test_nms_keeps_highest_score():
    a = sianms.Box3D(center=(0, 0, 0.85), size=(2, 4, 1.7), yaw=0.0, score=0.9)
    b = sianms.Box3D(center=(0, 0, 0.85), size=(2, 4, 1.7), yaw=0.0, score=0.8)
    kept = sianms.greedy_nms([a, b], iou_thr=0.3)
    assert len(kept) == 1
    assert kept[0].score == pytest.approx(0.9)


def test_matching():
    pairs = sianms.greedy_match([[0.2, 0.9], [0.5, 0.4]], dis_thr=1.0)
    assert [(r, c) for r, c, _ in pairs] == [(0, 0), (1, 1)]

    optimal = sianms.optimal_match([[1.0, 0.2], [0.3, 1.1]], dis_thr=2.0)
    assert sorted((r, c) for r, c, _ in optimal) == [(0, 1), (1, 0)]
    assert sum(d for _, _, d in optimal) == pytest.approx(0.5)


def test_contrastive_loss_closed_form():
    enc = sianms.Encoder.random_init(4, 4, 4, seed=3)
    zero = [0.0, 0.0, 0.0, 0.0]
    loss = sianms.contrastive_loss([(zero, zero, False)], enc, alpha=1.0, beta=3.0)
    assert loss == pytest.approx(4.5, abs=1e-12)
    assert sianms.contrastive_loss([(zero, zero, True)], enc) == pytest.approx(0.0)


def test_scene_roundtrip(tmp_path, scene):
    path = tmp_path / "scene.json"
    scene.save(str(path))
    loaded = sianms.load_scene(str(path))
    assert loaded.n_frames == scene.n_frames
    assert loaded.seed == scene.seed


def test_pipeline_variants(scene, encoder):
    vanilla = sianms.run_pipeline(scene, "vanilla")
    sia = sianms.run_pipeline(scene, "sianms", encoder)
    hybrid = sianms.run_pipeline(scene, "hybrid", encoder)
    assert len(vanilla) == scene.n_frames
    for f in range(scene.n_frames):
        assert len(sia[f]) <= len(vanilla[f])
        assert len(hybrid[f]) <= len(sia[f])
    assert sum(map(len, sia)) < sum(map(len, vanilla))

    with pytest.raises(sianms.SianmsError):
        sianms.run_pipeline(scene, "sianms")  # encoder required


def test_evaluation_and_benchmark(scene, encoder):
    sia = sianms.run_pipeline(scene, "sianms", encoder)
    report = sianms.evaluate(scene, sia, region="overlap")
    assert 0 in report
    assert report[0]["ap"] is None or 0.0 <= report[0]["ap"] <= 100.0

    bench = json.loads(sianms.run_benchmark_json(scene, encoder))
    overlap = bench["regions"]["overlap"]
    assert overlap["sianms"]["ap"] >= overlap["vanilla"]["ap"]
