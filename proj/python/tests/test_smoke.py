import math

import numpy as np
import pytest

import regfuse


def rot_z(deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def test_kabsch_recovers_transform():
    rng = np.random.default_rng(3)
    src = rng.normal(size=(40, 3))
    r = rot_z(30.0)
    t = np.array([0.1, -0.2, 0.3])
    tgt = src @ r.T + t
    m = regfuse.weighted_kabsch(src, tgt)
    assert np.allclose(m[:3, :3], r, atol=1e-10)
    assert np.allclose(m[:3, 3], t, atol=1e-10)


def test_kabsch_rejects_zero_weights():
    src = np.eye(3)
    with pytest.raises(ValueError):
        regfuse.weighted_kabsch(src, src, np.zeros(3))


def test_evaluate_pair_identity_is_zero():
    m = regfuse.evaluate_pair(np.eye(4), np.eye(4))
    assert m["error_r_deg"] == 0.0
    assert m["mse"] == 0.0


def test_chamfer_matches_numpy():
    rng = np.random.default_rng(5)
    a = rng.uniform(size=(50, 3))
    b = rng.uniform(size=(70, 3))
    d = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
    expected = d.min(1).mean() + d.min(0).mean()
    assert regfuse.chamfer_distance(a, b) == pytest.approx(expected, abs=1e-12)


def test_descriptor_shape():
    pair = regfuse.generate_pair(seed=1, points=256)
    desc = regfuse.compute_descriptors(pair["src"])
    assert desc.shape == (256, 33)
    assert np.allclose(np.linalg.norm(desc, axis=1), 1.0)


def test_generate_and_register():
    pair = regfuse.generate_pair(seed=11)
    assert pair["src"].shape == (512, 3)
    assert 0.65 <= np.mean(pair["mask"]) <= 0.75
    res = regfuse.register_a(pair["src"], pair["tgt"])
    assert regfuse.evaluate_pair(res["transform"], pair["gt"])["error_r_deg"] < 2.0
    res_b = regfuse.ransac_register(pair["src"], pair["tgt"], seed=2, max_iterations=5000)
    assert res_b["transform"].shape == (4, 4)


def test_overlap_out_of_range():
    with pytest.raises(ValueError):
        regfuse.generate_pair(overlap=1.5)


def test_fuse_predicate():
    eye = np.eye(4)
    d = regfuse.fuse(eye, eye, eye, ol1=0.5, ol3=0.9)
    assert d["chosen"] == "A"
    d = regfuse.fuse(eye, eye, eye, ol1=0.1, ol3=0.9)
    assert d["chosen"] == "B"
    assert not d["l3"] and not d["l4"]
