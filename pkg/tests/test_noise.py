import numpy as np
import pytest
from scipy import stats

from cpad.camera import CameraParams
from cpad.noise import (
    CalibConfig,
    DEFAULT_CALIB,
    NoiseParams,
    SceneSpec,
    capture,
    light_factor,
    make_dataset,
    params_to_noise,
    sample_params,
)


def _p(iso, shutter=30.0, f=2.0):
    return CameraParams(iso=iso, shutter_speed=shutter, f_number=f)


class TestParamsToNoise:
    def test_base_iso(self):
        n = params_to_noise(_p(100.0))
        assert n.lambda_read == pytest.approx(1e-6, rel=1e-12)
        assert n.lambda_shot == pytest.approx(1e-4, rel=1e-12)

    def test_iso_400_hand_evaluated(self):
        # g = 4: read 1e-6 * 16, shot 1e-4 * 4
        n = params_to_noise(_p(400.0))
        assert n.lambda_read == pytest.approx(1.6e-5, rel=1e-12)
        assert n.lambda_shot == pytest.approx(4e-4, rel=1e-12)

    def test_read_noise_quadratic_in_gain(self):
        ratio = params_to_noise(_p(3200.0)).lambda_read / params_to_noise(_p(100.0)).lambda_read
        assert ratio == pytest.approx(1024.0, rel=1e-9)

    def test_monotone_in_iso(self):
        isos = [100.0, 400.0, 1600.0, 6400.0]
        reads = [params_to_noise(_p(i)).lambda_read for i in isos]
        shots = [params_to_noise(_p(i)).lambda_shot for i in isos]
        assert reads == sorted(reads) and shots == sorted(shots)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            NoiseParams(-1e-9, 0.0)


class TestLightFactor:
    def test_reference_setting_is_unity(self):
        assert light_factor(_p(100.0, shutter=30.0, f=2.0)) == pytest.approx(1.0, rel=1e-12)

    def test_halving_shutter_doubles_light(self):
        base = light_factor(_p(100.0, shutter=60.0))
        assert light_factor(_p(100.0, shutter=30.0)) == pytest.approx(2 * base, rel=1e-12)

    def test_doubling_fnumber_quarters_light(self):
        base = light_factor(_p(100.0, f=2.0))
        assert light_factor(_p(100.0, f=4.0)) == pytest.approx(base / 4, rel=1e-12)

    def test_device_params_use_fallback_aperture(self):
        p = CameraParams(iso=100.0, shutter_speed=30.0, device_code=0)
        assert light_factor(p) == pytest.approx(1.0, rel=1e-12)


class TestCapture:
    def test_zero_noise_is_exact(self):
        calib = CalibConfig(k_read=0.0, k_shot=0.0)
        rng = np.random.default_rng(0)
        img = rng.uniform(0, 1, (16, 16, 3))
        y, x_cap = capture(SceneSpec(img, _p(400.0), seed=5), calib)
        np.testing.assert_array_equal(y, x_cap)

    def test_variance_matches_model_pre_clipping(self):
        # constant 0.5 image with known lambdas: var = 1e-4 + 1e-3 * 0.5 = 6e-4
        calib = CalibConfig(k_read=1e-4, k_shot=1e-3, base_iso=100.0)
        img = np.full((1000, 1000, 1), 0.5)
        y, x_cap = capture(SceneSpec(img, _p(100.0), seed=42), calib, clip=False)
        sample_var = float(np.var(y - x_cap))
        assert sample_var == pytest.approx(6e-4, rel=0.02)

    def test_unbiased_pre_clipping(self):
        calib = CalibConfig(k_read=1e-4, k_shot=1e-3)
        img = np.full((1000, 1000, 1), 0.5)
        y, x_cap = capture(SceneSpec(img, _p(100.0), seed=9), calib, clip=False)
        resid = y - x_cap
        n = resid.size
        sigma = np.sqrt(6e-4)
        assert abs(resid.mean()) < 3 * sigma / np.sqrt(n)

    def test_variance_law_across_levels(self):
        calib = CalibConfig(k_read=1e-4, k_shot=1e-3, base_iso=100.0)
        for level in (0.1, 0.5, 0.9):
            img = np.full((1000, 1000, 1), level)
            y, x_cap = capture(SceneSpec(img, _p(100.0), seed=17), calib, clip=False)
            resid = y - x_cap
            expected = 1e-4 + 1e-3 * level
            n = resid.size
            se = expected * np.sqrt(2.0 / (n - 1))
            assert abs(np.var(resid) - expected) < 3 * se

    def test_same_seed_bitwise_identical(self):
        rng = np.random.default_rng(3)
        img = rng.uniform(0, 1, (24, 24, 3))
        scene = SceneSpec(img, _p(1600.0), seed=77)
        y1, c1 = capture(scene)
        y2, c2 = capture(scene)
        assert np.array_equal(y1, y2) and np.array_equal(c1, c2)

    def test_noise_grows_with_iso(self):
        rng = np.random.default_rng(4)
        img = rng.uniform(0.2, 0.8, (64, 64, 3))
        mses = []
        for iso in (100.0, 400.0, 1600.0, 6400.0):
            y, x_cap = capture(SceneSpec(img, _p(iso), seed=123))
            mses.append(float(np.mean((y - x_cap) ** 2)))
        assert mses == sorted(mses)

    def test_scene_rejects_out_of_range_pixels(self):
        with pytest.raises(ValueError):
            SceneSpec(np.full((4, 4, 1), 1.5), _p(100.0), seed=0)


class TestSampleParams:
    def test_correlated_rank_correlation(self):
        rng = np.random.default_rng(0)
        draws = [sample_params(rng, mode="correlated") for _ in range(10_000)]
        rho = stats.spearmanr([d.iso for d in draws], [d.shutter_speed for d in draws]).statistic
        assert rho > 0.5

    def test_independent_mode_uncorrelated(self):
        rng = np.random.default_rng(1)
        draws = [sample_params(rng, mode="independent") for _ in range(10_000)]
        rho = stats.spearmanr([d.iso for d in draws], [d.shutter_speed for d in draws]).statistic
        assert abs(rho) < 0.1

    def test_draws_respect_ranges(self):
        rng = np.random.default_rng(2)
        c = DEFAULT_CALIB
        for _ in range(1000):
            d = sample_params(rng)
            assert c.iso.lo <= d.iso <= c.iso.hi
            assert c.shutter.lo <= d.shutter_speed <= c.shutter.hi
            assert c.f_number.lo <= d.f_number <= c.f_number.hi

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            sample_params(np.random.default_rng(0), mode="weird")


class TestMakeDataset:
    def test_empty(self):
        assert make_dataset(0) == []

    def test_deterministic(self):
        a = make_dataset(8, patch=16, seed=7)
        b = make_dataset(8, patch=16, seed=7)
        for (na, ca, pa), (nb, cb, pb) in zip(a, b):
            assert np.array_equal(na, nb) and np.array_equal(ca, cb)
            assert pa == pb

    def test_shapes_and_ranges(self):
        items = make_dataset(5, patch=24, seed=1)
        for noisy, clean, params in items:
            assert noisy.shape == (24, 24, 3) and clean.shape == (24, 24, 3)
            assert noisy.min() >= 0.0 and noisy.max() <= 1.0
            assert clean.min() >= 0.0 and clean.max() <= 1.0
            assert params.f_number is not None

    def test_noise_level_tracks_iso(self):
        items = make_dataset(300, patch=16, seed=5)
        isos = [p.iso for _, _, p in items]
        mags = [float(np.mean(np.abs(n - c))) for n, c, _ in items]
        rho = stats.spearmanr(isos, mags).statistic
        assert rho > 0.5
