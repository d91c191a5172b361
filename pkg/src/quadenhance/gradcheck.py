"""Central finite-difference checks of every analytic gradient in the package."""
from __future__ import annotations

import numpy as np

from . import losses
from .nn import layers as L
from .nn.network import NetworkSpec, backward, forward, init_params
from .transform import apply_transform_unclamped, transform_gradients, transform_input_gradient

STEP = 1e-5
TOLERANCE = 1e-4
MAX_ENTRIES = 40


def relative_error(analytic, numeric) -> float:
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    # floor: gradients that are exactly zero (e.g. a bias feeding batchnorm) leave only FD round-off
    scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-6)
    return float(np.linalg.norm(a - n) / scale)


def numeric_grad(f, arr, rng, h: float = STEP, max_entries: int = MAX_ENTRIES):
    """Central differences of scalar ``f()`` w.r.t. a random subset of ``arr`` entries (in place)."""
    flat = arr.reshape(-1)
    idx = np.arange(flat.size)
    if flat.size > max_entries:
        idx = np.sort(rng.choice(flat.size, max_entries, replace=False))
    out = np.empty(idx.size)
    for k, i in enumerate(idx):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        out[k] = (fp - fm) / (2 * h)
    return idx, out


def _compare(analytic, f, arr, rng) -> float:
    idx, num = numeric_grad(f, arr, rng)
    return relative_error(np.ravel(analytic)[idx], num)


def _check_layer(spec, x, params, buffers, rng, mode="train"):
    """Check input and parameter gradients of a single layer under a random projection."""
    seed = int(rng.integers(2**31))

    def run():
        r = np.random.default_rng(seed)
        if spec.kind == "conv2d":
            return L.conv2d_forward(x, params, spec)
        if spec.kind == "batchnorm":
            return L.batchnorm_forward(x, params, {k: v.copy() for k, v in buffers.items()}, spec,
                                       use_batch_stats=mode == "train", update_running=False)
        if spec.kind == "leaky_relu":
            return L.leaky_relu_forward(x, spec)
        if spec.kind == "dropout":
            return L.dropout_forward(x, spec, active=True, rng=r)
        if spec.kind == "avgpool_global":
            return L.avgpool_forward(x)
        return L.linear_forward(x, params, spec)

    y, cache = run()
    proj = rng.standard_normal(y.shape)
    if spec.kind == "conv2d":
        gx, pg = L.conv2d_backward(cache, proj, params, spec)
    elif spec.kind == "batchnorm":
        gx, pg = L.batchnorm_backward(cache, proj, params, spec)
    elif spec.kind == "leaky_relu":
        gx, pg = L.leaky_relu_backward(cache, proj, spec)
    elif spec.kind == "dropout":
        gx, pg = L.dropout_backward(cache, proj)
    elif spec.kind == "avgpool_global":
        gx, pg = L.avgpool_backward(cache, proj)
    else:
        gx, pg = L.linear_backward(cache, proj, params)

    def f():
        return float(np.sum(run()[0] * proj))

    errs = [_compare(gx, f, x, rng)]
    for k, g in pg.items():
        errs.append(_compare(g, f, params[k], rng))
    return max(errs)


def _away_from_zero(rng, shape, margin=1e-3):
    return rng.uniform(margin, 2.0, shape) * rng.choice([-1.0, 1.0], shape)


def check_conv2d(rng):
    cin, cout = int(rng.integers(1, 4)), int(rng.integers(1, 5))
    k = int(rng.integers(1, 5))
    s = int(rng.integers(1, 3))
    p = int(rng.integers(0, 2))
    size = int(rng.integers(max(k - 2 * p, 1), 8))
    spec = L.conv2d(cin, cout, kernel=k, stride=s, padding=p)
    x = rng.standard_normal((2, cin, size, size))
    params = {"weight": rng.standard_normal((cout, cin, k, k)), "bias": rng.standard_normal(cout)}
    return _check_layer(spec, x, params, {}, rng)


def check_batchnorm(rng):
    c = int(rng.integers(1, 5))
    spec = L.batchnorm(c)
    shape = (3, c, 3, 4) if rng.integers(2) else (5, c)
    x = rng.standard_normal(shape) * rng.uniform(0.5, 3) + rng.uniform(-2, 2)
    params = {"gamma": rng.uniform(0.5, 2, c), "beta": rng.standard_normal(c)}
    buffers = {"running_mean": rng.standard_normal(c), "running_var": rng.uniform(0.5, 2, c)}
    mode = "train" if rng.random() < 0.75 else "eval"
    return _check_layer(spec, x, params, buffers, rng, mode=mode)


def check_leaky_relu(rng):
    x = _away_from_zero(rng, (2, 3, 4, 4))
    return _check_layer(L.leaky_relu(float(rng.uniform(0.01, 0.5))), x, {}, {}, rng)


def check_dropout(rng):
    x = rng.standard_normal((4, 6))
    return _check_layer(L.dropout(float(rng.uniform(0.0, 0.9))), x, {}, {}, rng)


def check_avgpool_global(rng):
    x = rng.standard_normal((2, 3, int(rng.integers(1, 6)), int(rng.integers(1, 6))))
    return _check_layer(L.avgpool_global(), x, {}, {}, rng)


def check_linear(rng):
    fin, fout = int(rng.integers(1, 9)), int(rng.integers(1, 6))
    x = rng.standard_normal((3, fin)) if rng.integers(2) else rng.standard_normal((3, fin, 1, 1))
    params = {"weight": rng.standard_normal((fout, fin)), "bias": rng.standard_normal(fout)}
    return _check_layer(L.linear(fin, fout), x, params, {}, rng)


def tiny_network(input_size: int = 4, branches: int = 1) -> NetworkSpec:
    branch = [L.conv2d(3, 4, 3, 1, 1), L.batchnorm(4), L.leaky_relu(0.2),
              L.conv2d(4, 5, 3, 2, 1), L.leaky_relu(0.2), L.avgpool_global(), L.linear(5, 6)]
    head = [L.dropout(0.3), L.linear(6 * branches, 30)]
    return NetworkSpec("tiny", branches, branch, head, input_size)


def check_network(rng):
    spec = tiny_network(branches=int(rng.choice([1, 3])))
    params = init_params(spec, rng)
    for v in params.values.values():
        v[...] = rng.standard_normal(v.shape) * 0.5
    x = rng.standard_normal((3, 3, 4, 4))
    seed = int(rng.integers(2**31))
    y, cache = forward(spec, params, x, "train", np.random.default_rng(seed))
    proj = rng.standard_normal(y.shape)
    grads, gx = backward(spec, params, cache, proj)

    def f():
        out, _ = forward(spec, params, x, "train", np.random.default_rng(seed))
        return float(np.sum(out * proj))

    # one relative error over the stacked sampled entries: some entries (biases
    # feeding batchnorm) have an exactly-zero true gradient
    analytic, numeric = [], []
    for k in ["input", *rng.choice(list(params.values), size=6, replace=False)]:
        arr, g = (x, gx) if k == "input" else (params.values[k], grads[k])
        idx, num = numeric_grad(f, arr, rng)
        analytic.append(np.ravel(g)[idx])
        numeric.append(num)
    return relative_error(np.concatenate(analytic), np.concatenate(numeric))


def check_transform(rng):
    x = rng.uniform(0, 1, (4, 4, 3))
    theta = rng.standard_normal((10, 3)) * 0.3
    proj = rng.standard_normal(x.shape)

    def f():
        return float(np.sum(apply_transform_unclamped(x, theta) * proj))

    e1 = _compare(transform_gradients(x, proj), f, theta, rng)
    e2 = _compare(transform_input_gradient(x, theta, proj), f, x, rng)
    return max(e1, e2)


def check_lab_loss(rng):
    pred = rng.uniform(-0.1, 1.1, (4, 4, 3))
    target = rng.uniform(0, 1, (4, 4, 3))
    _, g = losses.lab_l2_loss(pred, target)
    return _compare(g, lambda: losses.lab_l2_loss(pred, target)[0], pred, rng)


def check_gan_loss(rng):
    real = rng.standard_normal((5, 1)) * 3
    fake = rng.standard_normal((5, 1)) * 3
    _, _, g = losses.gan_losses(real, fake)
    e1 = _compare(g["real"], lambda: losses.gan_losses(real, fake)[0], real, rng)
    e2 = _compare(g["fake"], lambda: losses.gan_losses(real, fake)[0], fake, rng)
    e3 = _compare(g["gen"], lambda: losses.gan_losses(real, fake)[1], fake, rng)
    return max(e1, e2, e3)


CHECKS = {
    "conv2d": check_conv2d,
    "batchnorm": check_batchnorm,
    "leaky_relu": check_leaky_relu,
    "dropout": check_dropout,
    "avgpool_global": check_avgpool_global,
    "linear": check_linear,
    "network": check_network,
    "transform": check_transform,
    "lab_loss": check_lab_loss,
    "gan_loss": check_gan_loss,
}


def run_gradcheck(kinds=None, cases: int = 100, seed: int = 0) -> dict:
    """Worst relative error per check over ``cases`` randomized cases."""
    kinds = list(CHECKS) if kinds is None else list(kinds)
    unknown = [k for k in kinds if k not in CHECKS]
    if unknown:
        raise KeyError(f"unknown gradient check {unknown[0]!r}; choose from {', '.join(CHECKS)}")
    results = {}
    for i, kind in enumerate(kinds):
        rng = np.random.default_rng([seed, i])
        results[kind] = max(CHECKS[kind](rng) for _ in range(cases))
    return results
