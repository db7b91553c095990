"""Symbol-error-rate estimation and reference baselines.

Monte-Carlo SER for a trained net or for the maximum-likelihood demodulator
with perfect channel knowledge, plus the closed-form error expressions for
the ideal receivers, and probability-grid export for visualizing decision
regions.
"""

import math
from dataclasses import dataclass

import numpy as np

from .channel import apply_nonlinearity, transmit
from .demodnet import demodulate, forward
from .numerics import q_function

_ORACLE_CHUNK = 1 << 16


@dataclass(frozen=True)
class SerEstimate:
    """Monte-Carlo symbol error rate with its binomial standard error."""

    errors: int
    trials: int
    rate: float
    std_error: float

    def __post_init__(self):
        if not 0 <= self.errors <= self.trials:
            raise ValueError(f"errors must lie in [0, trials], got {self.errors}/{self.trials}")

    @classmethod
    def from_counts(cls, errors, trials):
        rate = errors / trials
        return cls(errors=int(errors), trials=int(trials), rate=rate,
                   std_error=math.sqrt(rate * (1.0 - rate) / trials))


def ser_on_samples(params, labels, received):
    """SER of a net on an already-simulated test set."""
    predicted = demodulate(params, received)
    return SerEstimate.from_counts(int(np.sum(predicted != labels)), len(labels))


def estimate_ser(params, device, constellation, n_symbols, rng):
    """Monte-Carlo SER of a net: uniform random symbols through the device."""
    if n_symbols < 1:
        raise ValueError(f"n_symbols must be >= 1, got {n_symbols}")
    labels = rng.integers(0, constellation.size, size=n_symbols)
    received = transmit(labels, device, constellation, rng)
    return ser_on_samples(params, labels, received)


def ml_reference_points(device, constellation):
    """Noise-free receive point h*g(s) for every constellation symbol."""
    return device.h * apply_nonlinearity(constellation.symbols, device.alpha, device.beta)


def ml_oracle_predict(device, constellation, received):
    """Maximum-likelihood symbol decisions with perfect channel knowledge.

    Under circular Gaussian noise the ML rule is the nearest noise-free
    receive point: argmin_s |y - h*g(s)|^2 (the noise power drops out).
    """
    refs = ml_reference_points(device, constellation)
    received = np.asarray(received)
    out = np.empty(received.shape, dtype=np.int64)
    for start in range(0, len(received), _ORACLE_CHUNK):
        chunk = received[start:start + _ORACLE_CHUNK]
        d2 = np.abs(chunk[:, None] - refs[None, :]) ** 2
        out[start:start + _ORACLE_CHUNK] = np.argmin(d2, axis=1)
    return out


def ml_oracle_ser_on_samples(device, constellation, labels, received):
    predicted = ml_oracle_predict(device, constellation, received)
    return SerEstimate.from_counts(int(np.sum(predicted != labels)), len(labels))


def ml_oracle_ser(device, constellation, n_symbols, rng):
    """Monte-Carlo SER of the ML demodulator with perfect channel knowledge."""
    if n_symbols < 1:
        raise ValueError(f"n_symbols must be >= 1, got {n_symbols}")
    labels = rng.integers(0, constellation.size, size=n_symbols)
    received = transmit(labels, device, constellation, rng)
    return ml_oracle_ser_on_samples(device, constellation, labels, received)


def ideal_ser_toy(snr_linear):
    """Closed-form 4-PAM error probability (3/2) Q(sqrt(SNR/5)) of the ideal
    coherent receiver for the undistorted binary-fading channel."""
    if snr_linear <= 0:
        raise ValueError(f"snr_linear must be > 0, got {snr_linear}")
    return 1.5 * q_function(math.sqrt(snr_linear / 5.0))


def ideal_ser_realistic(snr_linear, alpha, beta, amplitude=1.0, abs_branches=False):
    """Closed-form 16-QAM reference 15 Q(d_min / sqrt(2 N_o)) under the
    amplitude-compressing amplifier, with N_o fixed by SNR = 10 A^2 / N_o.

    d_min is the minimum of two distorted nearest-neighbor distance
    expressions. As printed, the first branch is negative for the operating
    range used here (it is < 0 whenever 6*beta*A^2 < 1), which drives the
    formula above 1/2; abs_branches=True takes |.| of each branch instead.
    Values are returned verbatim either way, even when they exceed 1.
    """
    if snr_linear <= 0:
        raise ValueError(f"snr_linear must be > 0, got {snr_linear}")
    if alpha <= 0 or beta < 0 or amplitude <= 0:
        raise ValueError("need alpha > 0, beta >= 0, amplitude > 0")
    a2 = amplitude * amplitude
    noise_power = 10.0 * a2 / snr_linear
    root2 = math.sqrt(2.0)
    first = (12.0 * root2 * alpha * beta * amplitude**3 - 2.0 * root2 * alpha * amplitude) / (
        (1.0 + 2.0 * beta * a2) * (1.0 + 18.0 * beta * a2))
    second = (2.0 * alpha * amplitude * math.sqrt(1.0 + 12.0 * beta * a2 + 180.0 * beta**2 * a2**2)) / (
        (1.0 + 10.0 * beta * a2) * (1.0 + 18.0 * beta * a2))
    if abs_branches:
        first, second = abs(first), abs(second)
    d_min = min(first, second)
    return 15.0 * q_function(d_min / math.sqrt(2.0 * noise_power))


@dataclass(frozen=True)
class GridSpec:
    """Rectangular evaluation grid over the complex plane."""

    re_range: tuple = (-5.0, 5.0)
    im_range: tuple = (-5.0, 5.0)
    re_points: int = 81
    im_points: int = 81

    def __post_init__(self):
        if self.re_points < 2 or self.im_points < 2:
            raise ValueError("grid resolution must be >= 2 per axis")

    def points(self):
        """Grid points as a complex vector, re-major then im ascending."""
        res = np.linspace(self.re_range[0], self.re_range[1], self.re_points)
        ims = np.linspace(self.im_range[0], self.im_range[1], self.im_points)
        rr, ii = np.meshgrid(res, ims, indexing="ij")
        return (rr + 1j * ii).ravel()


def decision_grid(params, grid):
    """Class probabilities of a net over a grid of received values.

    Returns an (n_points, 2 + M) table with columns re, im, p0..p{M-1}, in
    row-major (re, im) order.
    """
    pts = grid.points()
    probs = forward(params, pts)
    return np.column_stack((pts.real, pts.imag, probs))


def origin_symmetry_diagnostic(params, grid):
    """How close the net's probability map is to p(s|y) = p(s|-y).

    Returns a dict with the mean absolute probability difference between each
    grid point and its negation, the mean per-point class-probability spread
    (max - min), and their ratio (small ratio = near origin-symmetric).
    """
    pts = grid.points()
    p_pos = forward(params, pts)
    p_neg = forward(params, -pts)
    mean_abs_diff = float(np.mean(np.abs(p_pos - p_neg)))
    mean_spread = float(np.mean(p_pos.max(axis=1) - p_pos.min(axis=1)))
    ratio = mean_abs_diff / mean_spread if mean_spread > 0 else float("inf")
    return {"mean_abs_diff": mean_abs_diff, "mean_spread": mean_spread, "ratio": ratio}
