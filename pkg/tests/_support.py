"""Shared test utilities: finite-difference gradient checking and tiny
network builders used by both the unit suite and the acceptance suite.
"""

from __future__ import annotations

import numpy as np

from specnet import nn


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-4)


def _numeric_grad(loss, arr: np.ndarray, idx, h: float) -> float:
    old = arr[idx]
    arr[idx] = old + h
    fp = loss()
    arr[idx] = old - h
    fm = loss()
    arr[idx] = old
    return (fp - fm) / (2.0 * h)


def check_layer_gradients(
    layer: nn.Layer,
    in_shape: tuple,
    seed: int = 0,
    n_checks: int = 110,
    h: float = 1e-5,
    nonneg: bool = False,
) -> tuple[float, int]:
    """Compare analytic layer gradients against central differences.

    Checks `n_checks` randomly chosen entries split between the layer's
    trainable parameters (when any) and the input. Returns (worst relative
    error, number of entries checked).
    """
    rng = np.random.default_rng(seed)
    layer.init_params(rng)
    for p in layer.params.values():
        p += 0.1 * rng.standard_normal(p.shape)
    x = rng.standard_normal(in_shape)
    if nonneg:
        x = np.abs(x) + 0.1
    probe = rng.standard_normal(layer.out_shape(in_shape))

    def loss() -> float:
        return float((layer.forward(x) * probe).sum())

    loss()  # cache forward state at the base point
    layer.zero_grads()
    dx = layer.backward(probe.copy())

    targets: list[tuple[np.ndarray, np.ndarray]] = [(x, dx)]
    for name in layer.params:
        targets.append((layer.params[name], layer.grads[name]))
    worst = 0.0
    n_checked = 0
    per_target = max(n_checks // len(targets), 1)
    for value, grad in targets:
        flat_v = value.reshape(-1)
        flat_g = np.asarray(grad).reshape(-1)
        take = min(per_target, flat_v.size)
        for idx in rng.choice(flat_v.size, size=take, replace=False):
            num = _numeric_grad(loss, flat_v, idx, h)
            worst = max(worst, rel_err(float(flat_g[idx]), num))
            n_checked += 1
    return worst, n_checked


def tiny_network(seed: int = 0) -> nn.Network:
    """A <=12x12-input network exercising every layer type, including the
    whole-map convolution fast path in the last conv."""
    table = [(i, j) for j in range(6) for i in range(4) if (i + j) % 4 != 3]
    layers = [
        nn.Conv(1, 4, 3, 3),
        nn.Tanh(),
        nn.SubtractiveNorm(3),
        nn.DivisiveNorm(3),
        nn.SubsPool(4, 2),
        nn.Conv(4, 6, 2, 2, table=table),
        nn.RectifiedSigmoid(6),
        nn.LpPool(2, p=2.0),
        nn.Conv(6, 8, 2, 2),
        nn.Tanh(),
        nn.Flatten(),
        nn.Full(8, 3, activation="sigmoid"),
    ]
    net = nn.Network(layers, (1, 12, 12))
    net.initialize(seed)
    return net


def check_network_gradients(
    net: nn.Network, seed: int = 0, n_checks: int = 120, h: float = 1e-5
) -> float:
    """Finite-difference check of dE/dW through a whole network against the
    squared-error loss. Returns the worst relative error seen."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(net.input_shape)
    target = rng.random(net.shapes[-1])

    def loss() -> float:
        return nn.mse_loss(net.forward(x), target)

    y = net.forward(x)
    net.zero_grads()
    net.backward(nn.mse_loss_grad(y, target))

    entries = [(v, g) for _, _, v, g in net.parameters()]
    sizes = np.array([v.size for v, _ in entries])
    picks = rng.choice(int(sizes.sum()), size=n_checks, replace=False)
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    worst = 0.0
    for pick in picks:
        t = int(np.searchsorted(offsets, pick, side="right")) - 1
        value, grad = entries[t]
        idx = int(pick - offsets[t])
        num = _numeric_grad(loss, value.reshape(-1), idx, h)
        worst = max(worst, rel_err(float(np.asarray(grad).reshape(-1)[idx]), num))
    return worst
