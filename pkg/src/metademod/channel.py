"""End-to-end IoT channel simulation: constellations, amplifier nonlinearity,
fading devices, and pilot dataset generation.

A transmitted symbol s passes through the amplitude-distorting amplifier
g(s) = alpha*|s| / (1 + beta*|s|^2) * exp(j*angle(s)), a constant complex
gain h, and additive Gaussian noise of power N_o:

    y = h * g(s) + z
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .numerics import sample_cgaussian

PAM4 = "pam4"
QAM16 = "qam16"

BINARY_FADING = "binary"
RAYLEIGH_FADING = "rayleigh"


@dataclass(frozen=True)
class Constellation:
    """Ordered symbol set of a modulation scheme.

    PAM4 symbols are exactly [-3, -1, 1, 3] on the real axis. QAM16 symbols
    are {a + jb : a, b in {-3A, -A, A, 3A}}, ordered row-major by (a, b)
    ascending. Labels everywhere in this package are indices into `symbols`.
    """

    scheme: str
    symbols: np.ndarray
    amplitude: float

    @property
    def size(self):
        return len(self.symbols)

    def mean_energy(self):
        """Mean symbol energy E[|s|^2]: 5 for PAM4, 10*A^2 for QAM16."""
        return float(np.mean(np.abs(self.symbols) ** 2))


def make_constellation(scheme, amplitude=1.0):
    """Build the constellation for a modulation scheme.

    Parameters:
        scheme    : "pam4" or "qam16"
        amplitude : QAM level spacing A > 0 (ignored for PAM4)
    """
    if amplitude <= 0:
        raise ValueError(f"amplitude must be > 0, got {amplitude}")
    if scheme == PAM4:
        symbols = np.array([-3.0, -1.0, 1.0, 3.0], dtype=np.complex128)
    elif scheme == QAM16:
        levels = amplitude * np.array([-3.0, -1.0, 1.0, 3.0])
        symbols = np.array([a + 1j * b for a in levels for b in levels])
    else:
        raise ValueError(f"unknown modulation scheme: {scheme!r}")
    return Constellation(scheme=scheme, symbols=symbols, amplitude=float(amplitude))


@dataclass(frozen=True)
class DeviceChannel:
    """End-to-end channel parameters of one device: gain h, amplifier
    constants (alpha, beta), and noise power N_o.

    real_noise selects a purely real noise process N(0, N_o) instead of the
    circular complex CN(0, N_o); either way E[|z|^2] = N_o. The real variant
    is the convention of the undistorted binary-fading scenario, where signal,
    gain and noise all live on the real axis (and where the closed-form ideal
    error rate assumes the full noise power in that axis).

    noise_power must be positive in production paths; passing
    allow_zero_noise=True permits the exact noiseless channel used by tests.
    """

    h: complex
    alpha: float
    beta: float
    noise_power: float
    real_noise: bool = field(default=False, kw_only=True)
    allow_zero_noise: bool = field(default=False, kw_only=True, repr=False, compare=False)

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.noise_power < 0 or (self.noise_power == 0 and not self.allow_zero_noise):
            raise ValueError(f"noise_power must be > 0, got {self.noise_power}")


def apply_nonlinearity(s, alpha, beta):
    """Amplitude-only amplifier distortion.

    Maps s to alpha*|s| / (1 + beta*|s|^2) * exp(j*angle(s)), computed in the
    equivalent form s * alpha / (1 + beta*|s|^2) so the phase of s is carried
    over exactly and s = 0 maps to exactly 0. Accepts scalars or arrays.

    Parameters:
        s     : complex input symbol(s)
        alpha : small-signal gain
        beta  : compression constant, >= 0
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    s = np.asarray(s, dtype=np.complex128)
    out = s * (alpha / (1.0 + beta * (s.real**2 + s.imag**2)))
    return complex(out) if out.ndim == 0 else out


def transmit(label, device, constellation, rng):
    """Send constellation symbol(s) through a device's end-to-end channel.

    Returns y = h * g(s) + z with noise z of power N_o drawn from rng
    (circular complex by default, purely real if the device says so).
    `label` may be a single index or an integer array; the return matches
    its shape.
    """
    label = np.asarray(label)
    if np.any(label < 0) or np.any(label >= constellation.size):
        raise ValueError(f"labels must lie in [0, {constellation.size})")
    s = constellation.symbols[label]
    x = apply_nonlinearity(s, device.alpha, device.beta)
    size = None if label.ndim == 0 else label.shape
    if device.real_noise:
        z = rng.normal(0.0, math.sqrt(device.noise_power), size=size)
    else:
        z = sample_cgaussian(rng, device.noise_power, size=size)
    y = device.h * x + z
    return complex(y) if label.ndim == 0 else y


def pilot_sequence(constellation, n):
    """First n labels of the fixed periodic pilot pattern 0, 1, ..., M-1, 0, ...

    A device transmitting this pattern cycles through the whole constellation,
    so a length n*M pilot set contains every symbol exactly n times.
    """
    if n < 1:
        raise ValueError(f"pilot count must be >= 1, got {n}")
    return np.arange(n, dtype=np.int64) % constellation.size


@dataclass(frozen=True)
class Dataset:
    """Labeled pilot set: symbol indices paired with received complex samples."""

    labels: np.ndarray
    received: np.ndarray

    def __post_init__(self):
        if len(self.labels) != len(self.received):
            raise ValueError("labels and received must have equal length")

    def __len__(self):
        return len(self.labels)

    @cached_property
    def features(self):
        """Received samples as (n, 2) real/imag rows, the demodulator input."""
        return np.column_stack((self.received.real, self.received.imag))

    def take(self, idx):
        return Dataset(self.labels[idx], self.received[idx])


@dataclass(frozen=True)
class MetaDataset:
    """Per-device pilot sets from K previously observed devices.

    `devices` keeps the true channel parameters for oracle evaluation only;
    learners must never read them.
    """

    per_device: tuple
    devices: tuple

    def __post_init__(self):
        if len(self.per_device) != len(self.devices):
            raise ValueError("per_device and devices must have equal length")

    def __len__(self):
        return len(self.per_device)


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario definition: modulation, SNR operating point, data layout and
    the device distribution.

    N pilots per meta-training device are split into N_tr + N_te = N. P is the
    default pilot budget for a single target device (sweeps override it).
    """

    scheme: str = PAM4
    snr_db: float = 15.0
    K: int = 20
    N: int = 8
    N_tr: int = 4
    N_te: int = 4
    P: int = 8
    amplitude: float = 1.0
    fading: str = BINARY_FADING
    alpha: float = 1.0
    beta_min: float = 0.0
    beta_max: float = 0.0
    noise: str = "complex"

    def __post_init__(self):
        if self.N_tr + self.N_te != self.N:
            raise ValueError(f"N_tr + N_te must equal N ({self.N_tr}+{self.N_te} != {self.N})")
        if self.fading not in (BINARY_FADING, RAYLEIGH_FADING):
            raise ValueError(f"unknown fading model: {self.fading!r}")
        if not self.beta_min <= self.beta_max:
            raise ValueError("beta_min must be <= beta_max")
        if self.noise not in ("complex", "real"):
            raise ValueError(f"noise must be 'complex' or 'real', got {self.noise!r}")

    def constellation(self):
        return make_constellation(self.scheme, self.amplitude)

    def noise_power(self):
        """N_o from the SNR definition E[|s|^2] / N_o = 10^(snr_db/10)."""
        return self.constellation().mean_energy() / 10.0 ** (self.snr_db / 10.0)


def toy_scenario(**overrides):
    """4-PAM with binary +/-1 fading, no distortion, 15 dB SNR.

    The whole channel is real-valued, so the noise process is the real
    N(0, N_o) variant; this is the convention under which the closed-form
    ideal error rate (3/2) Q(sqrt(SNR/5)) is exact.
    """
    base = dict(scheme=PAM4, snr_db=15.0, K=20, N=8, N_tr=4, N_te=4, P=8,
                amplitude=1.0, fading=BINARY_FADING, alpha=1.0, beta_min=0.0, beta_max=0.0,
                noise="real")
    base.update(overrides)
    return ScenarioConfig(**base)


def realistic_scenario(**overrides):
    """16-QAM with Rayleigh fading and amplifier distortion, 21 dB SNR."""
    base = dict(scheme=QAM16, snr_db=21.0, K=20, N=32, N_tr=16, N_te=16, P=32,
                amplitude=1.0, fading=RAYLEIGH_FADING, alpha=4.0, beta_min=0.05, beta_max=0.15)
    base.update(overrides)
    return ScenarioConfig(**base)


def sample_device(scenario, rng, index=None):
    """Draw one device from the scenario's device distribution.

    `index` selects meta-training device k (binary fading assigns h = +1 to
    the first half of the K devices and -1 to the rest); index=None draws a
    meta-test device (binary: +/-1 with equal probability). Rayleigh devices
    get h ~ CN(0, 1) and beta ~ U[beta_min, beta_max] regardless of role.
    """
    noise = scenario.noise_power()
    real = scenario.noise == "real"
    if scenario.fading == BINARY_FADING:
        if index is None:
            h = 1.0 if rng.random() < 0.5 else -1.0
        else:
            h = 1.0 if index < scenario.K / 2 else -1.0
        beta = scenario.beta_min
        if scenario.beta_max > scenario.beta_min:
            beta = rng.uniform(scenario.beta_min, scenario.beta_max)
        return DeviceChannel(h=complex(h), alpha=scenario.alpha, beta=beta,
                             noise_power=noise, real_noise=real)
    h = sample_cgaussian(rng, 1.0)
    beta = scenario.beta_min
    if scenario.beta_max > scenario.beta_min:
        beta = rng.uniform(scenario.beta_min, scenario.beta_max)
    return DeviceChannel(h=h, alpha=scenario.alpha, beta=beta,
                         noise_power=noise, real_noise=real)


def build_meta_dataset(scenario, rng):
    """Sample K meta-training devices and their N-pilot datasets.

    Every device transmits the same fixed pilot label sequence; reception
    noise is drawn independently per device from rng.
    """
    constellation = scenario.constellation()
    labels = pilot_sequence(constellation, scenario.N)
    devices = []
    datasets = []
    for k in range(scenario.K):
        device = sample_device(scenario, rng, index=k)
        received = transmit(labels, device, constellation, rng)
        devices.append(device)
        datasets.append(Dataset(labels.copy(), received))
    return MetaDataset(per_device=tuple(datasets), devices=tuple(devices))


def build_target_dataset(device, scenario, P, rng):
    """Receive the first P pilot labels through one target device."""
    if P < 1:
        raise ValueError(f"P must be >= 1, got {P}")
    constellation = scenario.constellation()
    labels = pilot_sequence(constellation, P)
    received = transmit(labels, device, constellation, rng)
    return Dataset(labels, received)
