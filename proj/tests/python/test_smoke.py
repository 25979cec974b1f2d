import os
import subprocess

import numpy as np
import pytest
from PIL import Image
from skimage.metrics import peak_signal_noise_ratio, structural_similarity

import dbdn


def smooth(h, w, seed):
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w]
    img = np.full((h, w, 3), 0.5, np.float32)
    for c in range(3):
        for _ in range(3):
            fy, fx = rng.uniform(0.01, 0.06, 2) * np.pi
            img[..., c] += rng.uniform(0.08, 0.2) * np.sin(fy * yy + fx * xx + rng.uniform(0, 6.28))
    return np.clip(img, 0, 1)


def test_parameter_counts():
    assert dbdn.count_params(blocks=1, layers=1, nr=2, scale=2) == 319
    assert dbdn.count_params() == 22545987
    assert dbdn.count_params("wo_inter") < dbdn.count_params("dbdn")


def test_bicubic_interior_matches_pillow():
    img = smooth(40, 48, 1)
    ours = dbdn.bicubic_resize(img, 20, 24)
    for c in range(3):
        ref = np.asarray(Image.fromarray(img[..., c], mode="F").resize((24, 20), Image.BICUBIC))
        # Pillow renormalizes truncated taps at the border instead of mirroring.
        assert np.abs(ours[4:-4, 4:-4, c] - ref[4:-4, 4:-4]).max() < 1e-4


def test_metrics_match_scikit_image():
    rng = np.random.default_rng(2)
    a = smooth(48, 40, 3)
    b = np.clip(a + rng.normal(0, 0.03, a.shape).astype(np.float32), 0, 1)
    ya, yb = dbdn.rgb_to_y(a), dbdn.rgb_to_y(b)
    crop = 3
    ca, cb = ya[crop:-crop, crop:-crop], yb[crop:-crop, crop:-crop]
    assert dbdn.psnr(a, b, crop) == pytest.approx(peak_signal_noise_ratio(ca, cb, data_range=255), abs=1e-9)
    ref = structural_similarity(ca, cb, data_range=255, gaussian_weights=True, sigma=1.5,
                                use_sample_covariance=False)
    assert dbdn.ssim(a, b, crop) == pytest.approx(ref, abs=1e-6)
    assert np.isinf(dbdn.psnr(a, a))


def test_network_round_trip_and_upscale(tmp_path):
    net = dbdn.Network(blocks=2, layers=2, nr=4, scale=3, seed=5)
    assert net.config["scale"] == 3
    assert net.param_breakdown()["total"] == net.num_params()
    path = tmp_path / "m.dbdn"
    net.save(path)
    back = dbdn.Network.load(path)
    assert back.to_bytes() == net.to_bytes()
    lr = smooth(10, 12, 4)
    sr = back.upscale(lr)
    assert sr.shape == (30, 36, 3)
    assert np.array_equal(sr, net.upscale(lr))
    assert np.isfinite(sr).all()
    with pytest.raises(dbdn.CheckpointError):
        dbdn.Network.from_bytes(b"DBDN\x00")


def test_grad_check_op():
    r = dbdn.grad_check("conv2d_transpose")
    assert r["passed"] and r["max_rel_error"] < 1e-3
    assert "relu" in dbdn.grad_check_ops()


def test_cli_entry_points():
    code, out, _ = dbdn.run_cli(["count-params", "--blocks", "1", "--layers", "1", "--nr", "2"])
    assert code == 0 and "total 319" in out
    assert dbdn.run_cli(["count-params", "--bogus"])[0] == 2
    exe = os.environ.get("DBDN_CLI")
    if exe:
        proc = subprocess.run([exe, "count-params", "--variant", "dbdn+", "--scale", "4"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "total 22989315" in proc.stdout


def test_png_round_trip(tmp_path):
    img = dbdn.quantize(smooth(9, 7, 6))
    dbdn.save_png(img, tmp_path / "a.png")
    assert np.array_equal(dbdn.load_image(tmp_path / "a.png"), img)
