"""Training procedures: plain SGD, MAML with exact second-order meta-updates,
the pooled joint-training benchmark, and few-pilot target adaptation.

One meta-iteration splits each device's pilots into an adaptation part and a
held-out part, takes one gradient step per device, and descends the summed
held-out loss of the adapted parameters. With a single inner step the exact
outer gradient per device is

    (I - eta * H_tr(theta)) @ grad L_te(theta'),

realized matrix-free as g_te - eta * hvp(theta, tr_batch, g_te); dropping the
Hessian term gives the first-order variant.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import Dataset
from .demodnet import NetParams, hvp, loss_grad


@dataclass(frozen=True)
class MetaConfig:
    """Step sizes, batch sizes and iteration budgets for meta-learning and
    target adaptation.

    adapt_steps=None derives the adaptation budget as adapt_epochs passes over
    the target pilots. adapt_small_batch_one drops the adaptation minibatch to
    size 1 (instead of the full pilot set) whenever fewer than adapt_batch
    pilots are available.
    """

    eta: float = 0.1
    kappa: float = 0.025
    inner_batch: int = 4
    outer_batch: int = 4
    meta_iterations: int = 1000
    inner_steps: int = 1
    second_order: bool = True
    adapt_batch: int = 1
    adapt_steps: int | None = None
    adapt_epochs: int = 200
    adapt_small_batch_one: bool = False

    def __post_init__(self):
        if self.eta < 0 or self.kappa < 0:
            raise ValueError("step sizes must be >= 0")
        if self.inner_batch < 1 or self.outer_batch < 1 or self.adapt_batch < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.inner_steps < 0 or self.meta_iterations < 0:
            raise ValueError("iteration counts must be >= 0")

    def adaptation_batch(self, n_pilots):
        """Adaptation minibatch size for a target set of n_pilots pairs."""
        if n_pilots >= self.adapt_batch:
            return self.adapt_batch
        return 1 if self.adapt_small_batch_one else n_pilots

    def adaptation_steps(self, n_pilots):
        """Total adaptation SGD steps for a target set of n_pilots pairs."""
        if self.adapt_steps is not None:
            return self.adapt_steps
        batches_per_epoch = math.ceil(n_pilots / self.adaptation_batch(n_pilots))
        return self.adapt_epochs * batches_per_epoch


def sgd_step(params, grad, eta):
    """One gradient-descent step theta - eta * grad on the flat parameters."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.theta.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match {params.theta.shape}")
    return NetParams(params.arch, params.theta - eta * grad)


def _draw_batch(dataset, batch, rng):
    """Minibatch without replacement; the full set when batch >= len(dataset)."""
    if batch >= len(dataset):
        return dataset
    return dataset.take(rng.choice(len(dataset), size=batch, replace=False))


def inner_adapt(params, trainset, cfg, rng):
    """inner_steps gradient steps of size eta on minibatches from trainset."""
    if len(trainset) == 0:
        raise ValueError("inner_adapt requires a non-empty trainset")
    for _ in range(cfg.inner_steps):
        _, g = loss_grad(params, _draw_batch(trainset, cfg.inner_batch, rng))
        params = sgd_step(params, g, cfg.eta)
    return params


def _meta_iteration(params, meta, split, cfg, rng):
    """One outer update over all devices; returns (params, mean held-out loss)."""
    n_tr, n_te = split
    exact_second_order = cfg.second_order and cfg.inner_steps == 1
    if cfg.second_order and cfg.inner_steps > 1:
        warnings.warn("second-order meta-updates support a single inner step; "
                      "falling back to the first-order variant", RuntimeWarning)

    outer_sum = np.zeros_like(params.theta)
    loss_sum = 0.0
    for ds in meta.per_device:
        if n_tr + n_te != len(ds):
            raise ValueError(f"split {split} does not partition {len(ds)} pilots")
        perm = rng.permutation(len(ds))
        trainset = ds.take(perm[:n_tr])
        testset = ds.take(perm[n_tr:])
        if exact_second_order:
            tr_batch = _draw_batch(trainset, cfg.inner_batch, rng)
            _, g_tr = loss_grad(params, tr_batch)
            adapted = sgd_step(params, g_tr, cfg.eta)
            te_loss, g_te = loss_grad(adapted, _draw_batch(testset, cfg.outer_batch, rng))
            outer_sum += g_te - cfg.eta * hvp(params, tr_batch, g_te)
        else:
            adapted = inner_adapt(params, trainset, cfg, rng)
            te_loss, g_te = loss_grad(adapted, _draw_batch(testset, cfg.outer_batch, rng))
            outer_sum += g_te
        loss_sum += te_loss
    return sgd_step(params, outer_sum, cfg.kappa), loss_sum / len(meta)


def maml_meta_iteration(params, meta, split, cfg, rng):
    """One meta-update: per device, re-split its pilots into (N_tr, N_te),
    adapt with an inner step, and descend the summed held-out loss."""
    return _meta_iteration(params, meta, split, cfg, rng)[0]


def maml_train(meta, cfg, init, rng, split=None, log_fn=None, log_every=100):
    """Run cfg.meta_iterations meta-updates from init and return the result.

    split defaults to halving each device's pilot set. When log_fn is given,
    telemetry lines "iteration,meta_loss" are emitted every log_every rounds.
    """
    if len(meta) == 0:
        raise ValueError("maml_train requires a non-empty meta dataset")
    if split is None:
        n = len(meta.per_device[0])
        split = (n // 2, n - n // 2)
    params = init
    for i in range(cfg.meta_iterations):
        params, mloss = _meta_iteration(params, meta, split, cfg, rng)
        if log_fn is not None and (i % log_every == 0 or i == cfg.meta_iterations - 1):
            log_fn(f"{i},{mloss:.6g}")
    return params


def pool_datasets(datasets):
    """Concatenate per-device pilot sets into one pooled dataset."""
    labels = np.concatenate([ds.labels for ds in datasets])
    received = np.concatenate([ds.received for ds in datasets])
    return Dataset(labels, received)


def sgd_train(dataset, lr, batch, iterations, init, rng, log_fn=None, log_every=100):
    """Minibatch SGD on one dataset's cross-entropy loss."""
    if len(dataset) == 0:
        raise ValueError("sgd_train requires a non-empty dataset")
    params = init
    for i in range(iterations):
        value, g = loss_grad(params, _draw_batch(dataset, batch, rng))
        params = sgd_step(params, g, lr)
        if log_fn is not None and (i % log_every == 0 or i == iterations - 1):
            log_fn(f"{i},{value:.6g}")
    return params


def joint_train(meta, lr, batch, iterations, init, rng, log_fn=None, log_every=100):
    """Benchmark trained by pooling every device's pilots into one SGD run."""
    if len(meta) == 0:
        raise ValueError("joint_train requires a non-empty meta dataset")
    return sgd_train(pool_datasets(meta.per_device), lr, batch, iterations, init, rng,
                     log_fn=log_fn, log_every=log_every)


def target_adapt(params, targetset, cfg, rng):
    """Adapt parameters to a target device from its few received pilots.

    Runs SGD steps of size eta on minibatches of the target set, reshuffling
    it each epoch, until the budget of cfg.adaptation_steps(P) is spent.
    """
    n = len(targetset)
    if n == 0:
        raise ValueError("target_adapt requires a non-empty target set")
    batch = cfg.adaptation_batch(n)
    steps = cfg.adaptation_steps(n)
    done = 0
    while done < steps:
        perm = rng.permutation(n)
        for start in range(0, n, batch):
            _, g = loss_grad(params, targetset.take(perm[start:start + batch]))
            params = sgd_step(params, g, cfg.eta)
            done += 1
            if done >= steps:
                break
    return params
