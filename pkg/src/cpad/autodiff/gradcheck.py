"""Central finite-difference verification of analytic gradients.

gradcheck() compares the backward pass of an arbitrary zero-argument
forward closure against (f(x+eps) - f(x-eps)) / (2 eps) on the tensors of
interest, projecting the output onto a fixed random direction so a single
scalar is differentiated.  op_suite() runs the battery covering every op.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .tensor import Tensor


@dataclass
class GradCheckResult:
    name: str
    max_abs_err: float
    max_rel_err: float
    n_checked: int

    def passed(self, rtol: float = 1e-4) -> bool:
        return self.max_rel_err < rtol


def gradcheck(fn, wrt, eps: float = 1e-3, seed: int = 0, sample: int | None = None):
    """Verify d(fn())/d(t) for every (name, tensor) in wrt.

    fn must be deterministic and close over the wrt tensors; their .data is
    perturbed in place for the numeric side.  Use float64 tensors.  sample
    limits the checked coordinates per tensor (seeded choice without
    replacement); None checks all of them.
    """
    out = fn()
    proj = np.random.Generator(np.random.Philox(key=seed)).standard_normal(out.shape)

    for _, t in wrt:
        t.grad = None
    out.backward(proj.astype(out.dtype))

    results = []
    pick_rng = np.random.Generator(np.random.Philox(key=seed + 1))
    for name, t in wrt:
        if t.grad is None:
            raise AssertionError(f"{name}: no gradient reached this tensor")
        analytic = t.grad.reshape(-1).astype(np.float64)
        flat = t.data.reshape(-1)
        if sample is not None and sample < flat.size:
            coords = np.sort(pick_rng.choice(flat.size, size=sample, replace=False))
        else:
            coords = np.arange(flat.size)
        numeric = np.empty(coords.size, dtype=np.float64)
        for j, i in enumerate(coords):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float((fn().data * proj).sum())
            flat[i] = orig - eps
            f_minus = float((fn().data * proj).sum())
            flat[i] = orig
            numeric[j] = (f_plus - f_minus) / (2.0 * eps)
        a = analytic[coords]
        abs_err = float(np.max(np.abs(a - numeric))) if coords.size else 0.0
        scale = max(float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(numeric), initial=0.0)), 1e-8)
        results.append(GradCheckResult(name, abs_err, abs_err / scale, int(coords.size)))
    return results


def _t(rng, *shape, lo=-1.0, hi=1.0):
    return Tensor(rng.uniform(lo, hi, size=shape), requires_grad=True, dtype=np.float64)


def op_suite(eps: float = 1e-3, seed: int = 0):
    """Finite-difference checks for every differentiable op, random shapes <= (2, 4, 8, 8)."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    checks = []

    x = _t(rng, 2, 3, 8, 8)
    w = _t(rng, 4, 3, 3, 3)
    b = _t(rng, 4)
    checks.append(("conv2d(3x3,pad1)", lambda: ops.conv2d(x, w, b, padding=1), [("x", x), ("w", w), ("b", b)]))

    xs = _t(rng, 2, 3, 8, 8)
    ws = _t(rng, 4, 3, 2, 2)
    bs = _t(rng, 4)
    checks.append(("conv2d(2x2,stride2)", lambda: ops.conv2d(xs, ws, bs, stride=2), [("x", xs), ("w", ws), ("b", bs)]))

    x1 = _t(rng, 2, 4, 8, 8)
    w1 = _t(rng, 3, 4, 1, 1)
    checks.append(("conv2d(1x1,nobias)", lambda: ops.conv2d(x1, w1), [("x", x1), ("w", w1)]))

    xd = _t(rng, 2, 4, 8, 8)
    wd = _t(rng, 4, 1, 3, 3)
    bd = _t(rng, 4)
    checks.append(("depthwise_conv2d", lambda: ops.depthwise_conv2d(xd, wd, bd), [("x", xd), ("w", wd), ("b", bd)]))

    xl = _t(rng, 2, 6)
    wl = _t(rng, 6, 5)
    bl = _t(rng, 5)
    checks.append(("linear", lambda: ops.linear(xl, wl, bl), [("x", xl), ("w", wl), ("b", bl)]))

    xn = _t(rng, 2, 4, 8, 8)
    checks.append(("layer_norm(4d)", lambda: ops.layer_norm(xn), [("x", xn)]))
    xn2 = _t(rng, 2, 7)
    checks.append(("layer_norm(2d)", lambda: ops.layer_norm(xn2), [("x", xn2)]))

    xa = _t(rng, 2, 4, 8, 8)
    checks.append(("silu", lambda: ops.silu(xa), [("x", xa)]))
    xg = _t(rng, 2, 4, 8, 8)
    checks.append(("sigmoid", lambda: ops.sigmoid(xg), [("x", xg)]))

    ma = _t(rng, 2, 4, 8, 8)
    mb = _t(rng, 2, 4, 8, 8)
    checks.append(("mul(same)", lambda: ops.mul(ma, mb), [("a", ma), ("b", mb)]))
    mc = _t(rng, 2, 4, 8, 8)
    md = _t(rng, 2, 4, 1, 1)
    checks.append(("mul(per-channel)", lambda: ops.mul(mc, md), [("a", mc), ("b", md)]))

    aa = _t(rng, 2, 4, 8, 8)
    ab = _t(rng, 1, 4, 1, 1)
    checks.append(("add(bias)", lambda: ops.add(aa, ab), [("a", aa), ("b", ab)]))

    xc = _t(rng, 2, 4, 8, 8)
    checks.append(("chunk2", lambda: ops.mul(*ops.chunk2(xc)), [("x", xc)]))

    ca = _t(rng, 2, 3, 4, 4)
    cb = _t(rng, 2, 2, 4, 4)
    checks.append(("concat", lambda: ops.concat(ca, cb, axis=1), [("a", ca), ("b", cb)]))

    xp = _t(rng, 2, 4, 8, 8)
    checks.append(("global_avg_pool", lambda: ops.global_avg_pool(xp), [("x", xp)]))

    xps = _t(rng, 2, 8, 4, 4)
    checks.append(("pixel_shuffle", lambda: ops.pixel_shuffle(xps, 2), [("x", xps)]))
    xpu = _t(rng, 2, 2, 8, 8)
    checks.append(("pixel_unshuffle", lambda: ops.pixel_unshuffle(xpu, 2), [("x", xpu)]))

    xr = _t(rng, 2, 4, 3, 3)
    checks.append(("reshape", lambda: ops.reshape(xr, (2, 36)), [("x", xr)]))

    xdo = _t(rng, 2, 4, 8, 8)
    checks.append(("dropout(p=0.3)", lambda: ops.dropout(xdo, 0.3, training=True, seed=7), [("x", xdo)]))

    # keep |pred - target| well away from the kink at 0 relative to eps
    lp = _t(rng, 2, 3, 8, 8, lo=0.5, hi=1.0)
    lt = _t(rng, 2, 3, 8, 8, lo=-1.0, hi=-0.5)
    checks.append(("l1_loss", lambda: ops.l1_loss(lp, lt), [("pred", lp), ("target", lt)]))

    emb = _t(rng, 5, 9)
    idx = np.array([0, 3, 3, 1])
    checks.append(("embedding_lookup", lambda: ops.sigmoid(ops.embedding_lookup(emb, idx)), [("table", emb)]))

    dx = _t(rng, 2, 4, 8, 8)
    dw = _t(rng, 2, 4, 1, 1)

    def diamond():
        # one tensor feeding two consumers: gradients must sum over paths
        p = ops.mul(dx, dw)
        q = ops.silu(dx)
        return ops.add(p, q)

    checks.append(("diamond-fanout", diamond, [("x", dx), ("w", dw)]))

    results = []
    for name, fn, wrt in checks:
        for r in gradcheck(fn, wrt, eps=eps, seed=seed):
            results.append(GradCheckResult(f"{name}/{r.name}", r.max_abs_err, r.max_rel_err, r.n_checked))
    return results


def format_table(results, rtol: float = 1e-4) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check'.ljust(width)}  {'max_abs':>12}  {'max_rel':>12}  {'n':>5}  status"]
    for r in results:
        status = "ok" if r.passed(rtol) else "FAIL"
        lines.append(f"{r.name.ljust(width)}  {r.max_abs_err:12.3e}  {r.max_rel_err:12.3e}  {r.n_checked:5d}  {status}")
    return "\n".join(lines)
