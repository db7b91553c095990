"""Softmax MLP demodulator with hand-rolled exact derivatives.

The network maps a received complex sample, presented as the 2-vector
[Re y, Im y], through fully connected layers with tanh or ReLU activations to
a softmax over the M constellation symbols. Training code needs the
cross-entropy loss, its exact gradient, and exact Hessian-vector products
(for second-order meta-updates), all of which are implemented here directly
on flat parameter vectors in double precision.
"""

import math
from dataclasses import dataclass

import numpy as np

TANH = "tanh"
RELU = "relu"


@dataclass(frozen=True)
class NetArch:
    """Layer widths (input 2, hidden..., output M) and activation name."""

    layer_sizes: tuple
    activation: str

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("need at least input and output layer sizes")
        if sizes[0] != 2:
            raise ValueError(f"input width must be 2 (real/imag), got {sizes[0]}")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be >= 1, got {sizes}")
        if self.activation not in (TANH, RELU):
            raise ValueError(f"unknown activation: {self.activation!r}")

    @property
    def n_classes(self):
        return self.layer_sizes[-1]

    def n_params(self):
        return sum((i + 1) * o for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))


@dataclass(frozen=True)
class NetParams:
    """Flat parameter vector plus the architecture that fixes its layout.

    The layout is, per layer, the weight matrix in row-major order followed by
    the bias vector; flatten/unflatten is a bijection.
    """

    arch: NetArch
    theta: np.ndarray

    def __post_init__(self):
        theta = np.ascontiguousarray(self.theta, dtype=np.float64)
        object.__setattr__(self, "theta", theta)
        if theta.shape != (self.arch.n_params(),):
            raise ValueError(
                f"theta has {theta.shape} entries, arch needs ({self.arch.n_params()},)")


@dataclass(frozen=True)
class InitSpec:
    """Initialization rule: constant(value) fills every weight and bias with
    `value`; gaussian draws weights N(0, 1/fan_in) and zeroes the biases."""

    mode: str
    value: float = 1.0

    def __post_init__(self):
        if self.mode not in ("constant", "gaussian"):
            raise ValueError(f"unknown init mode: {self.mode!r}")


def _layout(arch):
    """Per-layer (weight slice, bias slice, (out, in)) into the flat vector."""
    spans = []
    off = 0
    for fan_in, fan_out in zip(arch.layer_sizes[:-1], arch.layer_sizes[1:]):
        w = slice(off, off + fan_out * fan_in)
        b = slice(w.stop, w.stop + fan_out)
        spans.append((w, b, (fan_out, fan_in)))
        off = b.stop
    return spans


def unflatten(arch, vector):
    """Views of a flat vector as per-layer (W, b) pairs (no copies)."""
    vector = np.asarray(vector)
    if vector.shape != (arch.n_params(),):
        raise ValueError(f"vector length {vector.shape} does not match arch")
    return [(vector[w].reshape(shape), vector[b]) for w, b, shape in _layout(arch)]


def flatten(arch, layers):
    """Inverse of unflatten: pack per-layer (W, b) pairs into a flat vector."""
    out = np.empty(arch.n_params())
    for (w, b, shape), (W, B) in zip(_layout(arch), layers):
        if W.shape != shape or B.shape != (shape[0],):
            raise ValueError("layer shapes do not match arch")
        out[w] = W.ravel()
        out[b] = B
    return out


def init_params(arch, init_spec, rng=None):
    """Create a parameter vector per the init rule (rng needed for gaussian)."""
    if init_spec.mode == "constant":
        return NetParams(arch, np.full(arch.n_params(), float(init_spec.value)))
    if rng is None:
        raise ValueError("gaussian init requires an rng")
    theta = np.zeros(arch.n_params())
    for w, _b, (fan_out, fan_in) in _layout(arch):
        theta[w] = rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=fan_out * fan_in)
    return NetParams(arch, theta)


def _activate(z, activation):
    if activation == TANH:
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _activate_deriv(z, a, activation):
    # tanh' from the activation value; relu' uses the 0 subgradient at the kink
    if activation == TANH:
        return 1.0 - a * a
    return (z > 0.0).astype(np.float64)


def _forward_pass(params, X):
    """Run the net on feature rows X (n, 2).

    Returns (zs, acts, logits): acts[0] is X, acts[i+1] the i-th hidden
    activation, zs[i] the i-th hidden pre-activation.
    """
    layers = unflatten(params.arch, params.theta)
    act = params.arch.activation
    zs, acts = [], [X]
    for W, b in layers[:-1]:
        z = acts[-1] @ W.T + b
        zs.append(z)
        acts.append(_activate(z, act))
    W, b = layers[-1]
    logits = acts[-1] @ W.T + b
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("non-finite activations in demodulator forward pass")
    return zs, acts, logits


def _softmax(logits):
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy(logits, labels):
    # sum_n (logsumexp(logits_n) - logit of the true label); robust for
    # logit magnitudes up to ~700
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    return float(np.sum(lse - logits[np.arange(len(labels)), labels]))


def forward(params, y):
    """Class probabilities p(s | y) for a complex sample or array of samples.

    Output rows are positive and sum to 1; softmax is computed with max
    subtraction so logits of magnitude up to several hundred do not overflow.
    """
    y = np.asarray(y, dtype=np.complex128)
    X = np.column_stack((y.real.ravel(), y.imag.ravel()))
    _, _, logits = _forward_pass(params, X)
    probs = _softmax(logits)
    return probs[0] if y.ndim == 0 else probs.reshape(y.shape + (probs.shape[1],))


def demodulate(params, y):
    """Most likely symbol index under the net; ties go to the lowest index."""
    probs = forward(params, y)
    idx = np.argmax(probs, axis=-1)
    return int(idx) if idx.ndim == 0 else idx


def loss(params, dataset):
    """Cross-entropy -sum_n log p(s_n | y_n) over a pilot dataset."""
    if len(dataset) == 0:
        raise ValueError("loss requires a non-empty dataset")
    _, _, logits = _forward_pass(params, dataset.features)
    return _cross_entropy(logits, dataset.labels)


def loss_grad(params, dataset):
    """Cross-entropy value and its exact gradient as a flat vector.

    Reverse-mode accumulation: with G = softmax(logits) - onehot(labels), the
    last layer gets dW = G^T A, db = sum G, and the error is pulled back
    through each hidden layer via delta = (s @ W) * act'(z).
    """
    if len(dataset) == 0:
        raise ValueError("loss_grad requires a non-empty dataset")
    arch = params.arch
    layers = unflatten(arch, params.theta)
    zs, acts, logits = _forward_pass(params, dataset.features)
    value = _cross_entropy(logits, dataset.labels)

    G = _softmax(logits)
    G[np.arange(len(dataset)), dataset.labels] -= 1.0

    grad = np.empty(arch.n_params())
    spans = _layout(arch)
    w, b, _ = spans[-1]
    grad[w] = (G.T @ acts[-1]).ravel()
    grad[b] = G.sum(axis=0)

    s = G @ layers[-1][0]
    for i in range(len(zs) - 1, -1, -1):
        delta = s * _activate_deriv(zs[i], acts[i + 1], arch.activation)
        w, b, _ = spans[i]
        grad[w] = (delta.T @ acts[i]).ravel()
        grad[b] = delta.sum(axis=0)
        if i > 0:
            s = delta @ layers[i][0]
    return value, grad


def hvp(params, dataset, v):
    """Exact Hessian-vector product H(theta) @ v of the dataset loss.

    Forward-over-reverse: the forward pass carries directional derivatives
    Rz = R(acts) W^T + acts Vw^T + Vb alongside the activations, and the
    backward pass differentiates the gradient recursion term by term
    (R applied to delta = s * act'(z) needs act'' for the tanh path; the ReLU
    second derivative is taken as 0 everywhere). No finite differences.
    """
    if len(dataset) == 0:
        raise ValueError("hvp requires a non-empty dataset")
    arch = params.arch
    v = np.asarray(v, dtype=np.float64)
    if v.shape != params.theta.shape:
        raise ValueError(f"v has shape {v.shape}, parameters need {params.theta.shape}")
    layers = unflatten(arch, params.theta)
    vlayers = unflatten(arch, v)
    tanh = arch.activation == TANH

    X = dataset.features
    zs, acts, logits = [], [X], None
    rzs, racts = [], [np.zeros_like(X)]
    for (W, b), (Vw, Vb) in zip(layers[:-1], vlayers[:-1]):
        z = acts[-1] @ W.T + b
        rz = racts[-1] @ W.T + acts[-1] @ Vw.T + Vb
        a = _activate(z, arch.activation)
        zs.append(z)
        rzs.append(rz)
        acts.append(a)
        racts.append(_activate_deriv(z, a, arch.activation) * rz)
    (W, b), (Vw, Vb) = layers[-1], vlayers[-1]
    logits = acts[-1] @ W.T + b
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("non-finite activations in demodulator forward pass")
    rlogits = racts[-1] @ W.T + acts[-1] @ Vw.T + Vb

    P = _softmax(logits)
    # R of softmax-CE gradient wrt logits: (diag(P) - P P^T) Rlogits per row
    RG = P * (rlogits - (P * rlogits).sum(axis=1, keepdims=True))
    G = P
    G[np.arange(len(dataset)), dataset.labels] -= 1.0

    out = np.empty(arch.n_params())
    spans = _layout(arch)
    w, b_sl, _ = spans[-1]
    out[w] = (RG.T @ acts[-1] + G.T @ racts[-1]).ravel()
    out[b_sl] = RG.sum(axis=0)

    s = G @ layers[-1][0]
    rs = RG @ layers[-1][0] + G @ vlayers[-1][0]
    for i in range(len(zs) - 1, -1, -1):
        sp = _activate_deriv(zs[i], acts[i + 1], arch.activation)
        delta = s * sp
        rdelta = rs * sp
        if tanh:
            a = acts[i + 1]
            rdelta += s * (-2.0 * a * (1.0 - a * a)) * rzs[i]
        w, b_sl, _ = spans[i]
        out[w] = (rdelta.T @ acts[i] + delta.T @ racts[i]).ravel()
        out[b_sl] = rdelta.sum(axis=0)
        if i > 0:
            s = delta @ layers[i][0]
            rs = rdelta @ layers[i][0] + delta @ vlayers[i][0]
    return out
