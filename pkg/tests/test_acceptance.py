"""Acceptance suite: every criterion at its stated tolerance, one line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS/FAIL lines.
The slow criteria (desk-scale A/B training, controllability sweeps, and the
reproducibility re-run) share one module-scoped fixture that trains every
model once.
"""

import math
import time
from dataclasses import dataclass

import numpy as np
import pytest

from cpad import camera, metrics
from cpad.autodiff import Tensor, op_suite
from cpad.camera import CameraParams, ParamRange, encode, equalize
from cpad.net import CPADNet, ModelConfig, count_macs, count_params, denoise_image
from cpad.noise import CalibConfig, SceneSpec, capture, make_dataset
from cpad.testing import network_gradcheck
from cpad.train import TrainConfig, train

from test_metrics import oracle_psnr, oracle_ssim

GRADCHECK_RTOL = 1e-4
GRADCHECK_EPS = 1e-3
AB_GAIN_DB = 0.3
AB_SEEDS = (0, 1, 2)
AB_BUDGET_SECONDS = 45 * 60
SWEEP_PASS_FRACTION = 0.90
MACS_TARGET = 18.53e9
MACS_RTOL = 0.15
PARAMS_TARGET = 6.67e6
PARAMS_RTOL = 0.20
MACS_DELTA_MAX = 1e-4  # 0.01 %


def _report(criterion: str, ok: bool, detail: str):
    print(f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


# ---------------------------------------------------------------------------
# shared desk-scale training fixture (criteria 5, 6, 9)
# ---------------------------------------------------------------------------


@dataclass
class ABRun:
    train_data: list
    heldout: list
    cond_models: dict
    base_models: dict
    cond_psnr: dict
    base_psnr: dict
    noisy_psnr: float
    train_seconds: float
    repro_first: tuple  # (checkpoint bytes, metrics bytes)
    repro_second: tuple


def _heldout_psnr(model, heldout):
    vals = [
        metrics.psnr(denoise_image(model, noisy, params=params), clean)
        for noisy, clean, params in heldout
    ]
    return float(np.mean(vals))


@pytest.fixture(scope="module")
def ab(tmp_path_factory):
    train_data = make_dataset(240, patch=32, seed=123)
    heldout = make_dataset(50, patch=32, seed=98765)
    noisy_psnr = float(np.mean([metrics.psnr(n, c) for n, c, _ in heldout]))

    cond_models, base_models, cond_psnr, base_psnr = {}, {}, {}, {}
    t0 = time.time()
    for seed in AB_SEEDS:
        rc = train(TrainConfig(iters=3000, seed=seed, conditioned=True), ModelConfig.desk(), train_data)
        rb = train(TrainConfig(iters=3000, seed=seed, conditioned=False), ModelConfig.desk(), train_data)
        cond_models[seed], base_models[seed] = rc.model, rb.model
        cond_psnr[seed] = _heldout_psnr(rc.model, heldout)
        base_psnr[seed] = _heldout_psnr(rb.model, heldout)
    train_seconds = time.time() - t0

    # reproducibility: the same desk-scale run twice, bitwise
    def run_with_artifacts(out_dir):
        r = train(
            TrainConfig(iters=3000, seed=0, conditioned=True),
            ModelConfig.desk(),
            train_data,
            out_dir=out_dir,
        )
        ckpt = open(r.checkpoint_path, "rb").read()
        log = open(out_dir / "metrics.jsonl", "rb").read()
        return ckpt, log

    repro_first = run_with_artifacts(tmp_path_factory.mktemp("repro_a"))
    repro_second = run_with_artifacts(tmp_path_factory.mktemp("repro_b"))

    return ABRun(
        train_data=train_data,
        heldout=heldout,
        cond_models=cond_models,
        base_models=base_models,
        cond_psnr=cond_psnr,
        base_psnr=base_psnr,
        noisy_psnr=noisy_psnr,
        train_seconds=train_seconds,
        repro_first=repro_first,
        repro_second=repro_second,
    )


# ---------------------------------------------------------------------------
# criterion 1: gradient verification
# ---------------------------------------------------------------------------


def test_criterion_1_gradient_verification():
    t0 = time.time()
    results = op_suite(eps=GRADCHECK_EPS)
    results += network_gradcheck(eps=GRADCHECK_EPS, sample=24)
    elapsed = time.time() - t0
    worst = max(r.max_rel_err for r in results)
    failing = [r.name for r in results if not r.passed(GRADCHECK_RTOL)]
    _report(
        "criterion 1 (gradient verification)",
        not failing and elapsed < 120.0,
        f"{len(results)} checks, max rel err {worst:.3e} (tol {GRADCHECK_RTOL:.0e}), "
        f"{elapsed:.1f}s (< 120s); failing: {failing}",
    )


# ---------------------------------------------------------------------------
# criterion 2: identity at initialization
# ---------------------------------------------------------------------------


def test_criterion_2_identity_at_init():
    rng = np.random.default_rng(0)
    ok = True
    for trial in range(3):
        x = Tensor(rng.uniform(0, 1, (2, 3, 16, 16)).astype(np.float32))
        v = Tensor(rng.uniform(0, 1, (2, 27)).astype(np.float32))
        cond = CPADNet(ModelConfig.desk(), seed=trial)
        base = CPADNet(ModelConfig.desk(conditioned=False), seed=trial + 50)
        out_c = cond.forward(x, v)
        out_b = base.forward(x)
        ok = ok and np.array_equal(out_c.data, x.data)
        ok = ok and np.array_equal(out_b.data, x.data)
        ok = ok and np.array_equal(out_c.data, out_b.data)
    _report(
        "criterion 2 (identity at init)",
        ok,
        "conditioned output == input == baseline output, exactly, for random inputs and v",
    )


# ---------------------------------------------------------------------------
# criterion 3: noise-model variance law
# ---------------------------------------------------------------------------


def test_criterion_3_noise_model_law():
    calib = CalibConfig(k_read=1e-4, k_shot=1e-3, base_iso=100.0)
    params = CameraParams(iso=100.0, shutter_speed=30.0, f_number=2.0)
    details = []
    ok = True
    for level, seed in ((0.1, 101), (0.5, 102), (0.9, 103)):
        img = np.full((1000, 1000, 1), level)
        y, x_cap = capture(SceneSpec(img, params, seed=seed), calib, clip=False)
        resid = (y - x_cap).ravel()
        expected = 1e-4 + 1e-3 * level
        sample_var = float(np.var(resid))
        se = expected * math.sqrt(2.0 / (resid.size - 1))
        ok = ok and abs(sample_var - expected) < 3 * se
        details.append(f"x={level}: var {sample_var:.6e} vs {expected:.1e} ({abs(sample_var-expected)/se:.2f} SE)")
    _report("criterion 3 (noise-model law)", ok, "; ".join(details))


# ---------------------------------------------------------------------------
# criterion 4: encoding suite
# ---------------------------------------------------------------------------


def test_criterion_4_encoding_suite():
    rng = np.random.default_rng(4)
    bounded = True
    for _ in range(10_000):
        p = CameraParams(
            iso=float(np.exp(rng.uniform(0, 14))),
            shutter_speed=float(np.exp(rng.uniform(-4, 11))),
            f_number=float(np.exp(rng.uniform(-1, 4))),
        )
        v = encode(p).values
        bounded = bounded and v.shape == (27,) and v.min() >= 0.0 and v.max() <= 1.0

    iso_range = ParamRange(50.0, 25600.0)
    monotone = True
    for _ in range(2_000):
        lo_p, hi_p = sorted(rng.uniform(50.0, 25600.0, size=2))
        a, b = equalize(lo_p, iso_range), equalize(hi_p, iso_range)
        monotone = monotone and all(b[i] >= a[i] for i in camera.MONOTONE_INCREASING)
        monotone = monotone and all(b[i] <= a[i] for i in camera.MONOTONE_DECREASING)

    at_lo = equalize(50.0, iso_range)
    at_hi = equalize(25600.0, iso_range)
    endpoints = (
        at_lo[0] == 0.0 and at_lo[1] == 1.0 and at_hi[0] == 1.0 and at_hi[1] == 0.0
    )
    _report(
        "criterion 4 (encoding suite)",
        bounded and monotone and endpoints,
        f"10^4 random params bounded={bounded}, monotone components={monotone}, endpoints exact={endpoints}",
    )


# ---------------------------------------------------------------------------
# criterion 5: desk-scale conditioned-vs-baseline gain
# ---------------------------------------------------------------------------


def test_criterion_5_desk_scale_ab(ab):
    gaps = [ab.cond_psnr[s] - ab.base_psnr[s] for s in AB_SEEDS]
    mean_gap = float(np.mean(gaps))
    beats_noisy = all(ab.cond_psnr[s] > ab.noisy_psnr and ab.base_psnr[s] > ab.noisy_psnr for s in AB_SEEDS)
    ok = mean_gap >= AB_GAIN_DB and ab.train_seconds < AB_BUDGET_SECONDS and beats_noisy
    per_seed = ", ".join(
        f"seed {s}: {ab.cond_psnr[s]:.2f} vs {ab.base_psnr[s]:.2f} dB" for s in AB_SEEDS
    )
    _report(
        "criterion 5 (desk-scale A/B)",
        ok,
        f"mean gain {mean_gap:.3f} dB (>= {AB_GAIN_DB}); {per_seed}; noisy input "
        f"{ab.noisy_psnr:.2f} dB; training wall time {ab.train_seconds/60:.1f} min (< 45)",
    )


# ---------------------------------------------------------------------------
# criterion 6: controllability sweeps
# ---------------------------------------------------------------------------


def test_criterion_6_controllability(ab):
    model = ab.cond_models[0]
    grid = [100.0, 400.0, 1600.0, 6400.0]
    good = 0
    for noisy, clean, params in ab.heldout:
        records = metrics.sweep(model, noisy, params, "iso", grid)
        energies = [r.residual_energy for r in records]
        if all(b >= a for a, b in zip(energies, energies[1:])):
            good += 1
    frac = good / len(ab.heldout)
    _report(
        "criterion 6 (controllability)",
        frac >= SWEEP_PASS_FRACTION,
        f"residual energy nondecreasing along ISO grid on {good}/{len(ab.heldout)} held-out images "
        f"({frac:.0%}, need >= {SWEEP_PASS_FRACTION:.0%})",
    )


# ---------------------------------------------------------------------------
# criterion 7: accounting
# ---------------------------------------------------------------------------


def test_criterion_7_accounting():
    base_cfg = ModelConfig.paper(conditioned=False)
    cond_cfg = ModelConfig.paper(conditioned=True)
    macs_base = count_macs(base_cfg, 256, 256)
    macs_cond = count_macs(cond_cfg, 256, 256)
    params_base = count_params(base_cfg)
    macs_err = (macs_base - MACS_TARGET) / MACS_TARGET
    params_err = (params_base - PARAMS_TARGET) / PARAMS_TARGET
    delta = (macs_cond - macs_base) / macs_base
    ok = abs(macs_err) <= MACS_RTOL and abs(params_err) <= PARAMS_RTOL and 0 <= delta < MACS_DELTA_MAX
    _report(
        "criterion 7 (accounting)",
        ok,
        f"MACs {macs_base/1e9:.3f}G vs 18.53G ({macs_err:+.1%}, tol ±15%); params {params_base/1e6:.3f}M "
        f"vs 6.67M ({params_err:+.1%}, tol ±20%); conditioning MACs delta {delta:.5%} (< 0.01%)",
    )


# ---------------------------------------------------------------------------
# criterion 8: metric oracles
# ---------------------------------------------------------------------------


def test_criterion_8_metric_oracles():
    rng = np.random.default_rng(8)
    psnr_ok = True
    for _ in range(100):
        a = rng.uniform(size=(9, 7, 3))
        b = rng.uniform(size=(9, 7, 3))
        psnr_ok = psnr_ok and abs(metrics.psnr(a, b) - oracle_psnr(a, b)) < 1e-9

    ssim_ok = True
    for _ in range(100):
        a = rng.uniform(size=(13, 12))
        b = np.clip(a + rng.normal(scale=0.08, size=a.shape), 0, 1)
        ssim_ok = ssim_ok and abs(metrics.ssim(a, b) - oracle_ssim(a, b)) < 1e-6

    a = np.full((16, 16), 0.3)
    b = np.full((16, 16), 0.2)
    twenty = metrics.psnr(a, b) == 10.0 * math.log10(1.0 / float(np.mean((a - b) ** 2)))
    twenty = twenty and abs(metrics.psnr(a, b) - 20.0) < 1e-9

    _report(
        "criterion 8 (metric oracles)",
        psnr_ok and ssim_ok and twenty,
        f"PSNR oracle < 1e-9 on 100 pairs: {psnr_ok}; SSIM oracle < 1e-6 on 100 pairs: {ssim_ok}; "
        f"20 dB closed form exact: {twenty}",
    )


# ---------------------------------------------------------------------------
# criterion 9: bitwise reproducibility
# ---------------------------------------------------------------------------


def test_criterion_9_reproducibility(ab):
    ckpt_same = ab.repro_first[0] == ab.repro_second[0]
    log_same = ab.repro_first[1] == ab.repro_second[1]
    _report(
        "criterion 9 (reproducibility)",
        ckpt_same and log_same,
        f"two desk-scale runs: checkpoint bytes identical={ckpt_same}, loss log identical={log_same}",
    )
