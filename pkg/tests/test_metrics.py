import math

import numpy as np
import pytest

from cpad.camera import CameraParams
from cpad.metrics import PSNR_CAP_DB, evaluate, psnr, ssim, sweep, total_variation
from cpad.net import CPADNet, ModelConfig
from cpad.noise import make_dataset


def oracle_psnr(a, b, peak=1.0):
    """Direct-formula PSNR over flattened python floats."""
    af = [float(x) for x in np.asarray(a).ravel()]
    bf = [float(x) for x in np.asarray(b).ravel()]
    mse = sum((x - y) ** 2 for x, y in zip(af, bf)) / len(af)
    return 10.0 * math.log10(peak * peak / mse)


def oracle_ssim(a, b, peak=1.0, k1=0.01, k2=0.03, win=11, sigma=1.5):
    """Naive per-window SSIM: explicit loops, valid windows, Gaussian weights."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    r = np.arange(win) - (win - 1) / 2.0
    k = np.exp(-(r ** 2) / (2 * sigma ** 2))
    kern = np.outer(k, k)
    kern /= kern.sum()
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    h, w, c = a.shape
    vals = []
    for ch in range(c):
        for i in range(h - win + 1):
            for j in range(w - win + 1):
                wa = a[i : i + win, j : j + win, ch]
                wb = b[i : i + win, j : j + win, ch]
                mu_a = (wa * kern).sum()
                mu_b = (wb * kern).sum()
                va = (wa * wa * kern).sum() - mu_a ** 2
                vb = (wb * wb * kern).sum() - mu_b ** 2
                cov = (wa * wb * kern).sum() - mu_a * mu_b
                vals.append(
                    ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                    / ((mu_a ** 2 + mu_b ** 2 + c1) * (va + vb + c2))
                )
    return float(np.mean(vals))


class TestPsnr:
    def test_identical_images_report_cap(self):
        x = np.random.default_rng(0).uniform(size=(8, 8))
        assert psnr(x, x) == PSNR_CAP_DB

    def test_twenty_db_closed_form(self):
        a = np.full((16, 16), 0.3)
        b = np.full((16, 16), 0.2)
        expected = 10.0 * math.log10(1.0 / np.mean((a - b) ** 2))
        assert psnr(a, b) == expected
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        a, b = rng.uniform(size=(12, 12)), rng.uniform(size=(12, 12))
        assert psnr(a, b) == psnr(b, a)

    def test_matches_direct_oracle_on_random_pairs(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            a = rng.uniform(size=(9, 7, 3))
            b = rng.uniform(size=(9, 7, 3))
            assert psnr(a, b) == pytest.approx(oracle_psnr(a, b), abs=1e-9)

    def test_strictly_decreasing_in_mse(self):
        rng = np.random.default_rng(3)
        base = rng.uniform(0.3, 0.7, size=(16, 16))
        noise = rng.normal(size=(16, 16))
        last = math.inf
        for scale in (0.001, 0.003, 0.01, 0.03, 0.1):
            val = psnr(base, base + scale * noise)
            assert val < last
            last = val

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4)), np.zeros((4, 5)))


class TestSsim:
    def test_self_similarity_is_one(self):
        x = np.random.default_rng(4).uniform(size=(16, 16))
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(size=(14, 14))
        b = rng.uniform(size=(14, 14))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-15)

    def test_anticorrelated_gradient_is_negative(self):
        g = np.tile(np.linspace(0.0, 1.0, 24), (24, 1))
        assert ssim(g, 1.0 - g) < 0.0

    def test_bounded(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            a = rng.uniform(size=(13, 13))
            b = rng.uniform(size=(13, 13))
            assert -1.0 <= ssim(a, b) <= 1.0

    def test_matches_naive_window_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            a = rng.uniform(size=(14, 13))
            b = np.clip(a + rng.normal(scale=0.08, size=(14, 13)), 0, 1)
            assert ssim(a, b) == pytest.approx(oracle_ssim(a, b), abs=1e-6)

    def test_multichannel_matches_oracle(self):
        rng = np.random.default_rng(8)
        a = rng.uniform(size=(12, 12, 3))
        b = np.clip(a + rng.normal(scale=0.05, size=a.shape), 0, 1)
        assert ssim(a, b) == pytest.approx(oracle_ssim(a, b), abs=1e-6)

    def test_stable_under_identical_small_shift(self):
        rng = np.random.default_rng(9)
        a = rng.uniform(0.2, 0.7, size=(16, 16))
        b = np.clip(a + rng.normal(scale=0.01, size=a.shape), 0, 1)
        assert abs(ssim(a + 1e-3, b + 1e-3) - ssim(a, b)) < 1e-6

    def test_too_small_image(self):
        with pytest.raises(ValueError, match="window"):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))


class TestTotalVariation:
    def test_constant_image_is_zero(self):
        assert total_variation(np.full((10, 12), 0.4)) == 0.0

    def test_vertical_step_analytic_value(self):
        h, w = 10, 16
        img = np.zeros((h, w))
        img[:, w // 2 :] = 1.0
        # one |1-0| horizontal jump per row; (h-1)*w vertical + h*(w-1) horizontal terms
        expected = h / ((h - 1) * w + h * (w - 1))
        assert total_variation(img) == pytest.approx(expected, rel=1e-12)

    def test_noisy_exceeds_clean(self):
        items = make_dataset(20, patch=16, seed=3)
        noisier = sum(total_variation(n) > total_variation(c) for n, c, _ in items)
        assert noisier == len(items)


@pytest.fixture(scope="module")
def identity_model():
    return CPADNet(ModelConfig.tiny(), seed=0)


class TestSweep:

    def test_grid_of_one_equals_plain_denoise(self, identity_model):
        from cpad.net import denoise_image

        rng = np.random.default_rng(10)
        img = rng.uniform(size=(16, 16, 3)).astype(np.float32)
        base = CameraParams(iso=800, shutter_speed=30, f_number=2.0)
        records, outputs = sweep(identity_model, img, base, "iso", [800.0], return_outputs=True)
        assert len(records) == 1
        direct = denoise_image(identity_model, img, params=base)
        np.testing.assert_array_equal(outputs[0], direct)

    def test_deterministic(self, identity_model):
        rng = np.random.default_rng(11)
        img = rng.uniform(size=(16, 16, 3)).astype(np.float32)
        base = CameraParams(iso=800, shutter_speed=30, f_number=2.0)
        r1 = sweep(identity_model, img, base, "iso", [100, 1600])
        r2 = sweep(identity_model, img, base, "iso", [100, 1600])
        assert [r.to_dict() for r in r1] == [r.to_dict() for r in r2]

    def test_output_shapes_match_input(self, identity_model):
        rng = np.random.default_rng(12)
        img = rng.uniform(size=(20, 28, 3)).astype(np.float32)
        base = CameraParams(iso=400, shutter_speed=30, f_number=2.0)
        _, outputs = sweep(identity_model, img, base, "shutter", [10, 100], return_outputs=True)
        assert all(o.shape == img.shape for o in outputs)

    def test_fnum_axis_requires_aperture_params(self, identity_model):
        img = np.zeros((16, 16, 3), np.float32)
        base = CameraParams(iso=400, shutter_speed=30, device_code=0)
        with pytest.raises(ValueError, match="fnum"):
            sweep(identity_model, img, base, "fnum", [2.0])

    def test_unknown_axis(self, identity_model):
        img = np.zeros((16, 16, 3), np.float32)
        base = CameraParams(iso=400, shutter_speed=30, f_number=2.0)
        with pytest.raises(ValueError, match="axis"):
            sweep(identity_model, img, base, "gain", [1.0])


class TestEvaluate:
    def test_report_aggregates_are_means(self):
        model = CPADNet(ModelConfig.tiny(), seed=0)
        data = make_dataset(6, patch=16, seed=21)
        report = evaluate(model, data)
        assert len(report.per_image) == 6
        for key in ("psnr", "ssim", "tv_out"):
            assert report.aggregates[key] == pytest.approx(
                np.mean([r[key] for r in report.per_image]), rel=1e-12
            )
        assert report.model_info["n_params"] > 0
        d = report.to_dict()
        assert set(d) == {"per_image", "aggregates", "model"}
