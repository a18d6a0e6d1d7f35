import json

import numpy as np
import pytest

import sac


def test_softmax_sums_to_one():
    p = sac.softmax(np.array([1.0, 2.0, 3.0]))
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.argmax(p) == 2


def test_topk_orders_and_breaks_ties_low():
    classes, scores = sac.topk_search(np.array([0.2, 0.5, 0.2, 0.1]), 3)
    assert classes == [1, 0, 2]
    assert scores == [0.5, 0.2, 0.2]


def test_factorised_joint_matches_full_bilinear():
    rng = np.random.default_rng(3)
    d_f, f, d_e, k, d_j = 3, 4, 2, 3, 5
    F = rng.normal(size=(d_f, f))
    E = rng.normal(size=(d_e, k))
    T_u = rng.normal(size=(d_f, d_e, d_j))
    M = sac.attention_map(F, E, rng.normal(size=(d_f, d_e)))
    J = sac.joint_representation(F, E, T_u, M)
    # Dense tensor whose (F_i, E_j) slice is M_ij * T_u.
    T = np.zeros((d_f * f, d_e * k, d_j))
    for a in range(d_f):
        for i in range(f):
            for b in range(d_e):
                for j in range(k):
                    T[a * f + i, b * k + j] = M[i, j] * T_u[a, b]
    np.testing.assert_allclose(J, sac.full_bilinear_reference(F, E, T), rtol=1e-10)


def test_fuse_and_masks():
    np.testing.assert_allclose(sac.fuse(np.array([0.6, 0.4]), np.array([0.2, 0.8]), 0.5), [0.4, 0.6])
    M = np.array([[0.9, 0.9], [0.05, 0.5], [0.2, 0.01]])
    assert sac.keep_mask(M, 0.1, "or") == [0, 1, 1]
    assert sac.keep_mask(M, 0.1, "and") == [0, 0, 0]


def test_threshold_bbox_contains_peak():
    heat = np.zeros((10, 10))
    heat[3, 5] = 1.0
    heat[6, 2] = 0.5
    assert sac.threshold_bbox(heat) == (3, 2, 6, 5)
    with pytest.raises(sac.SacError):
        sac.threshold_bbox(np.zeros((4, 4)))


def test_generate_train_evaluate_predict(tmp_path):
    n = sac.generate_dataset(tmp_path / "data", groups=2, siblings=2, images_per_class=4, image_size=32, seed=0)
    assert n == 16
    manifest = tmp_path / "data" / "manifest.jsonl"
    cfg = {"image_size": "32", "d_e": "16", "d_j": "16", "word_dim": "8", "widths": "4,8,8,8", "d_v": "8",
           "k": "2", "epochs": "1", "batch_size": "4"}
    ckpt = tmp_path / "model.ckpt"
    epochs = sac.train(manifest, ckpt, cfg)
    assert len(epochs) == 1 and np.isfinite(epochs[0]["loss"])
    assert ckpt.exists()
    for mode in ("backbone_only", "fused", "localized"):
        rep = sac.evaluate(ckpt, manifest, {**cfg, "mode": mode})
        assert 0.0 <= rep["top1"] <= 1.0
        if mode == "backbone_only":
            assert rep["top1"] <= rep["hit_at_k"]
        assert rep["images"] == 4  # 3 train + 1 test per class
    rec = json.loads(sac.predict(ckpt, tmp_path / "data" / "images" / "c0000_000.png", cfg))
    assert len(rec["topk_coarse"]) == 2
    assert "box" not in rec


def test_bad_config_key_raises():
    with pytest.raises(sac.SacError):
        sac.evaluate("missing.ckpt", "missing.jsonl", {"no_such_key": "1"})
