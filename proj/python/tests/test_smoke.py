import os

import numpy as np
import pytest

import mspc


def tent_warp(image, field):
    # plain numpy bilinear sampling over the whole source image
    c, h, w = image.shape
    u = (field[..., 0] + 1) * (w - 1) / 2
    v = (field[..., 1] + 1) * (h - 1) / 2
    xs = np.arange(w)[None, None, :]
    ys = np.arange(h)[None, None, :]
    wx = np.maximum(0, 1 - np.abs(u.reshape(h * w, 1, 1) - xs))
    wy = np.maximum(0, 1 - np.abs(v.reshape(h * w, 1, 1) - ys))
    weights = wy.reshape(h * w, h, 1) * wx.reshape(h * w, 1, w)
    return np.einsum("pyx,cyx->cp", weights, image).reshape(c, h, w)


def test_identity_warp_is_exact():
    rng = np.random.default_rng(0)
    img = rng.uniform(-1, 1, (3, 12, 12))
    out = mspc.warp(img, mspc.reference_grid(2))
    assert np.array_equal(out, img)


def test_warp_matches_numpy_oracle():
    rng = np.random.default_rng(1)
    img = rng.uniform(-1, 1, (2, 9, 9))
    grid = mspc.reference_grid(3) * 1.3 + rng.uniform(-0.2, 0.2, (3, 3, 2))
    field = mspc.densify(grid, 9, 9)
    assert field.shape == (9, 9, 2)
    np.testing.assert_allclose(mspc.warp(img, grid), tent_warp(img, field), atol=1e-12)


def test_bad_grid_shape_rejected():
    with pytest.raises(ValueError):
        mspc.warp(np.zeros((1, 4, 4)), np.zeros((2, 3, 2)))


def test_constraint_penalty():
    q = mspc.reference_grid(2)
    assert mspc.constraint_penalty(q) == 0.0
    assert mspc.is_feasible(q * 2.0)
    assert not mspc.is_feasible(q * 4.0)
    assert mspc.constraint_penalty(q * 4.0) > 0.0
    np.testing.assert_allclose(mspc.pairwise_scale_ratios(q * 2.0), [2.0] * 6)
    with pytest.raises(ValueError):
        mspc.constraint_penalty(q, a=0.5)


def test_rsp_transform_feasible():
    for seed in range(20):
        family, magnitude, grid = mspc.rsp_transform(seed)
        assert isinstance(family, str)
        assert mspc.is_feasible(grid)


def test_sliced_wasserstein():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(50, 6))
    assert mspc.sliced_wasserstein(a, a) == 0.0
    b = a + 1.0
    assert mspc.sliced_wasserstein(a, b, 64, 1) == pytest.approx(mspc.sliced_wasserstein(b, a, 64, 1))
    assert mspc.sliced_wasserstein(a, b) > 0


def test_datasets_deterministic():
    d1 = mspc.make_misaligned_task(3, n=6, size=16)
    d2 = mspc.make_misaligned_task(3, n=6, size=16)
    assert d1["source"].shape == (6, 3, 16, 16)
    assert np.array_equal(d1["target"], d2["target"])
    assert d1["ground_truth"].shape == d1["source"].shape
    assert d1["source"].min() >= -1 and d1["source"].max() <= 1
    with pytest.raises(mspc.ConfigError):
        mspc.make_shapes_task(1, n=1)


def test_golden_warp_png():
    from PIL import Image

    data = os.environ.get("MSPC_TEST_DATA", os.path.join(os.path.dirname(__file__), "..", "..", "tests", "data"))
    docs = os.path.join(os.path.dirname(__file__), "..", "..", "docs", "corner_pull_grid.txt")
    rows = [l.split() for l in open(docs) if l.strip() and not l.startswith("#")]
    k = int(rows[0][0])
    grid = np.array(rows[1:], dtype=float).reshape(k, k, 2)
    img = np.asarray(Image.open(os.path.join(data, "warp_input.png")).convert("RGB"), dtype=np.float64)
    img = img.transpose(2, 0, 1) / 127.5 - 1
    out = mspc.warp(img, grid)
    got = np.rint((np.clip(out, -1, 1) + 1) * 127.5).astype(np.uint8).transpose(1, 2, 0)
    golden = np.asarray(Image.open(os.path.join(data, "warp_corner_pull_golden.png")).convert("RGB"))
    assert np.abs(got.astype(int) - golden.astype(int)).max() <= 1


def test_train_and_evaluate(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(
        '[task]\nname = "shapes"\nn = 8\nsize = 16\n\n[model]\nbase_width = 8\nnum_blocks = 0\n\n'
        "[train]\nepochs = 1\nbatch_size = 4\n\n[eval]\nprojections = 8\n"
    )
    out = tmp_path / "run"
    assert mspc.train(str(cfg), str(out)) == 0
    lines = (out / "metrics.csv").read_text().strip().splitlines()
    assert len(lines) >= 2
    digest, params = mspc.read_checkpoint(str(out / "ckpt_epoch0001.mspc"))
    assert digest == mspc.config_digest(str(cfg))
    assert any(name.startswith("G.") for name in params)
    assert mspc.evaluate(str(cfg), str(out / "ckpt_epoch0001.mspc"), str(out)) == 0
    assert (out / "eval" / "eval.csv").exists()


def test_bad_config_raises(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[constraint]\na = 0.5\n")
    with pytest.raises(ValueError, match="constraint.a"):
        mspc.train(str(cfg), str(tmp_path / "x"))
