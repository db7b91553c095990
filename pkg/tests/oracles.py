"""Independent numerical oracles used by the tests.

These deliberately avoid the package's own code paths: the Gaussian tail is
computed by quadrature of the density, and derivatives by central finite
differences of scalar evaluations.
"""

import math

import numpy as np

from metademod.channel import Dataset
from metademod.demodnet import InitSpec, NetArch, NetParams, init_params, loss
from metademod.numerics import rng_stream


def gaussian_tail(x, upper=40.0, n=200001):
    """P(Z > x) by composite Simpson integration of the standard normal pdf."""
    if x > upper:
        return 0.0
    grid = np.linspace(x, upper, n)
    pdf = np.exp(-0.5 * grid * grid) / math.sqrt(2.0 * math.pi)
    h = (upper - x) / (n - 1)
    weights = np.ones(n)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(h / 3.0 * np.sum(weights * pdf))


def fd_loss_grad(params, dataset, eps=1e-5):
    """Central-difference gradient of the cross-entropy loss."""
    theta = params.theta
    out = np.empty_like(theta)
    for i in range(len(theta)):
        plus = theta.copy()
        plus[i] += eps
        minus = theta.copy()
        minus[i] -= eps
        out[i] = (loss(NetParams(params.arch, plus), dataset)
                  - loss(NetParams(params.arch, minus), dataset)) / (2.0 * eps)
    return out


def fd_hvp(params, dataset, v, eps=1e-4):
    """Hessian-vector product from central differences of exact gradients."""
    from metademod.demodnet import loss_grad

    _, gp = loss_grad(NetParams(params.arch, params.theta + eps * v), dataset)
    _, gm = loss_grad(NetParams(params.arch, params.theta - eps * v), dataset)
    return (gp - gm) / (2.0 * eps)


def random_net(sizes, activation, seed, jitter=0.05):
    """A gaussian-initialized net nudged off any symmetric point."""
    rng = rng_stream(seed, 101)
    arch = NetArch(sizes, activation)
    params = init_params(arch, InitSpec("gaussian"), rng)
    return NetParams(arch, params.theta + jitter * rng.normal(size=arch.n_params()))


def random_dataset(n_classes, n, seed, spread=2.0):
    """Labeled complex samples roughly matching received-signal magnitudes."""
    rng = rng_stream(seed, 202)
    labels = rng.integers(0, n_classes, size=n)
    received = spread * (rng.normal(size=n) + 1j * rng.normal(size=n))
    return Dataset(labels, received)


def max_coord_rel_err(got, want, floor=1e-3):
    """Max per-coordinate relative error with an absolute floor for tiny
    coordinates (finite differences bottom out near 1e-10 in absolute terms)."""
    return float(np.max(np.abs(got - want) / np.maximum(np.abs(want), floor)))
