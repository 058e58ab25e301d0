import math

import numpy as np
import pytest

import affdepth


def test_ssi_loss_value_and_gradient_shape():
    value, grad = affdepth.loss("ssi", np.array([[1.0, 2.0, 4.0]]), np.array([[1.0, 2.0, 3.0]]))
    assert value == pytest.approx(1 / 84, abs=1e-12)
    assert grad.shape == (1, 3)


def test_ssi_is_affine_invariant():
    rng = np.random.default_rng(0)
    gt = rng.uniform(0.5, 5, (8, 9))
    pred = rng.uniform(0.5, 5, (8, 9))
    a, _ = affdepth.loss("ssi", pred, gt)
    b, _ = affdepth.loss("ssi", 3.5 * pred + 0.7, gt)
    assert abs(a - b) <= 1e-10 * a


def test_unknown_loss_raises():
    with pytest.raises(ValueError):
        affdepth.loss("nope", np.ones((2, 2)), np.ones((2, 2)))
    assert "combined" in affdepth.loss_names()


def test_evaluate_recovers_alignment():
    gt = np.array([[1.0, 2.0, 4.0], [8.0, 3.0, 5.0]])
    report = affdepth.evaluate(3 * gt + 2, gt)
    assert report["scale"] == pytest.approx(1 / 3)
    assert report["shift"] == pytest.approx(-2 / 3)
    assert report["abs_rel"] < 1e-9
    assert report["whdr"] is None
    assert affdepth.lsq_align(3 * gt + 2, gt) == pytest.approx((1 / 3, -2 / 3))


def test_nan_pixels_are_invalid():
    gt = np.array([[1.0, 2.0, math.nan, 4.0]])
    assert affdepth.evaluate(gt * 2, gt)["n_valid"] == 3
    points = affdepth.unproject(gt, 1, 1, 0, 0)
    assert points.shape == (3, 3)
    assert points[1].tolist() == [2.0, 0.0, 2.0]


def test_plane_normals_face_the_camera():
    normals = affdepth.surface_normals(np.full((5, 5), 2.0), 1, 1, 2, 2)
    assert normals.shape == (5, 5, 3)
    assert normals[2, 2].tolist() == pytest.approx([0, 0, -1])


def test_curriculum():
    assert affdepth.pacing(0, 0, [0.1], 100, 1, 1000, 1000) == 100
    assert affdepth.pacing(1, 0, [0.1], 100, 1, 1000, 1000) == 200
    orders = affdepth.make_plan([(0, [0, 1, 2])], {0: 0.3, 1: 0.1, 2: 0.2}, [0.5], 10, 1, 30)
    assert orders[0] == [1, 2, 0]
    batches = affdepth.batches([(0, [0, 1, 2])], {0: 0.3, 1: 0.1, 2: 0.2}, [0.3], 10, 1, 30, seed=4)
    assert len(batches) == 30
    assert all(b[0] == 1 for b in batches[:10])
    with pytest.raises(ValueError):
        affdepth.make_plan([(0, [0])], {0: 0.0}, [0.5], 10, 1, 30, mode="sideways")


def test_ingest_gate():
    dx = np.full((10, 10), 0.4)
    dy = np.zeros((10, 10))
    depth, report = affdepth.ingest(dx, dy, -dx, dy)
    assert report["accepted"]
    assert np.allclose(depth, 1.0)
    dy_bad = dy.copy()
    dy_bad.flat[:71] = 9
    depth, report = affdepth.ingest(dx, dy_bad, -dx, dy)
    assert depth is None
    assert report["n_removed_vertical"] == 71


def test_pfm_round_trip(tmp_path):
    d = np.array([[1.5, math.nan], [0.25, 3.0]])
    path = str(tmp_path / "d.pfm")
    affdepth.write_pfm(d, path)
    back = affdepth.read_pfm(path)
    assert np.array_equal(np.isnan(back), np.isnan(d))
    assert back[1, 0] == 0.25


def test_gradcheck():
    worst, passed = affdepth.gradcheck("vnl", trials=3, seed=1)
    assert passed
    assert worst < 1e-4
