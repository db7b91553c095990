import numpy as np
import pytest

from metademod.channel import (Dataset, DeviceChannel, MetaDataset, ScenarioConfig,
                               apply_nonlinearity, build_meta_dataset,
                               build_target_dataset, make_constellation,
                               pilot_sequence, realistic_scenario, sample_device,
                               toy_scenario, transmit)
from metademod.numerics import rng_stream


# ---------------- constellations ----------------

def test_pam4_symbols_exact():
    c = make_constellation("pam4")
    assert np.array_equal(c.symbols, np.array([-3, -1, 1, 3], dtype=complex))
    assert c.size == 4
    assert c.mean_energy() == pytest.approx(5.0)


def test_qam16_energy_and_layout():
    c = make_constellation("qam16", amplitude=1.0)
    assert c.size == 16
    assert c.mean_energy() == pytest.approx(10.0)
    # row-major by (re, im) ascending
    assert c.symbols[0] == pytest.approx(-3 - 3j)
    assert c.symbols[1] == pytest.approx(-3 - 1j)
    assert c.symbols[-1] == pytest.approx(3 + 3j)
    assert make_constellation("qam16", amplitude=2.0).mean_energy() == pytest.approx(40.0)


def test_constellation_rejects_bad_inputs():
    with pytest.raises(ValueError):
        make_constellation("qam64")
    with pytest.raises(ValueError):
        make_constellation("qam16", amplitude=0.0)


# ---------------- amplifier nonlinearity ----------------

def test_nonlinearity_identity_configuration_is_exact():
    for s in [3 + 0j, -3 + 0j, -1 + 2j, 0.3 - 0.7j]:
        assert apply_nonlinearity(s, 1.0, 0.0) == s


def test_nonlinearity_known_value():
    # alpha=4, beta=0.1, |s|=3: 4*3/(1+0.9) = 12/1.9
    assert apply_nonlinearity(3 + 0j, 4.0, 0.1) == pytest.approx(12 / 1.9)


def test_nonlinearity_zero_maps_to_zero():
    assert apply_nonlinearity(0j, 4.0, 0.1) == 0j


def test_nonlinearity_preserves_phase():
    rng = rng_stream(2, 0)
    s = rng.normal(size=50) + 1j * rng.normal(size=50)
    out = apply_nonlinearity(s, 4.0, 0.12)
    assert np.max(np.abs(np.angle(out) - np.angle(s))) <= 1e-12


def test_nonlinearity_amplitude_map_monotone_below_knee():
    beta = 0.15
    r = np.linspace(0.0, 1.0 / np.sqrt(beta) - 1e-6, 2000)
    g = 4.0 * r / (1.0 + beta * r * r)
    assert np.all(np.diff(g) > 0)


def test_distorted_pam_amplitudes_stay_distinct():
    for beta in (0.05, 0.1, 0.15):
        out = apply_nonlinearity(np.array([-3, -1, 1, 3], dtype=complex), 4.0, beta)
        assert len(np.unique(np.round(out, 12))) == 4


# ---------------- transmit ----------------

def _noiseless(h, alpha=1.0, beta=0.0):
    return DeviceChannel(h=h, alpha=alpha, beta=beta, noise_power=0.0, allow_zero_noise=True)


def test_transmit_noiseless_identity_channel():
    c = make_constellation("pam4")
    rng = rng_stream(0, 0)
    assert transmit(3, _noiseless(1.0), c, rng) == 3 + 0j
    assert transmit(3, _noiseless(-1.0), c, rng) == -3 + 0j


def test_transmit_noiseless_distorted():
    c = make_constellation("pam4")
    y = transmit(3, _noiseless(1.0, alpha=4.0, beta=0.1), c, rng_stream(0, 0))
    assert y == pytest.approx(12 / 1.9)


def test_transmit_rejects_bad_label():
    c = make_constellation("pam4")
    with pytest.raises(ValueError):
        transmit(4, _noiseless(1.0), c, rng_stream(0, 0))


@pytest.mark.parametrize("real_noise", [False, True])
def test_transmit_noise_energy_calibration(real_noise):
    # empirical E[|y - h g(s)|^2] over 1e5 transmissions within 2% of N_o
    c = make_constellation("pam4")
    n_o = 0.158113883
    dev = DeviceChannel(h=-1.0, alpha=1.0, beta=0.0, noise_power=n_o, real_noise=real_noise)
    rng = rng_stream(21, 5)
    labels = rng.integers(0, 4, size=10**5)
    y = transmit(labels, dev, c, rng)
    z = y - dev.h * c.symbols[labels]
    assert np.mean(np.abs(z) ** 2) == pytest.approx(n_o, rel=0.02)
    if real_noise:
        assert np.all(z.imag == 0)


# ---------------- pilots ----------------

def test_pilot_sequence_cycles():
    c4 = make_constellation("pam4")
    assert pilot_sequence(c4, 8).tolist() == [0, 1, 2, 3, 0, 1, 2, 3]
    assert pilot_sequence(c4, 2).tolist() == [0, 1]
    c16 = make_constellation("qam16")
    seq = pilot_sequence(c16, 32)
    assert seq.tolist() == list(range(16)) * 2


def test_pilot_sequence_counts_balanced():
    c = make_constellation("pam4")
    for reps in (1, 2, 5):
        seq = pilot_sequence(c, reps * 4)
        assert np.bincount(seq, minlength=4).tolist() == [reps] * 4


def test_pilot_sequence_rejects_zero():
    with pytest.raises(ValueError):
        pilot_sequence(make_constellation("pam4"), 0)


# ---------------- device sampling ----------------

def test_toy_meta_train_half_split():
    scen = toy_scenario()
    rng = rng_stream(1, 1)
    hs = [sample_device(scen, rng, index=k).h for k in range(scen.K)]
    assert hs[:10] == [1.0 + 0j] * 10
    assert hs[10:] == [-1.0 + 0j] * 10


def test_toy_meta_test_device_equiprobable():
    scen = toy_scenario()
    rng = rng_stream(1, 2)
    hs = np.array([sample_device(scen, rng).h.real for _ in range(4000)])
    assert set(np.unique(hs)) == {-1.0, 1.0}
    assert abs(np.mean(hs)) < 0.05
    dev = sample_device(scen, rng_stream(1, 3))
    assert dev.alpha == 1.0 and dev.beta == 0.0 and dev.real_noise


def test_toy_noise_power_value():
    assert toy_scenario().noise_power() == pytest.approx(0.158113883, abs=1e-9)


def test_realistic_noise_power_value():
    assert realistic_scenario().noise_power() == pytest.approx(0.0794328235, abs=1e-9)


def test_realistic_device_distribution():
    scen = realistic_scenario()
    rng = rng_stream(4, 4)
    devs = [sample_device(scen, rng) for _ in range(3000)]
    hs = np.array([d.h for d in devs])
    betas = np.array([d.beta for d in devs])
    assert np.mean(np.abs(hs) ** 2) == pytest.approx(1.0, rel=0.1)
    assert all(d.alpha == 4.0 for d in devs)
    assert betas.min() >= 0.05 and betas.max() <= 0.15
    assert not devs[0].real_noise
    assert np.mean(betas) == pytest.approx(0.10, abs=0.005)


# ---------------- dataset builders ----------------

def test_build_meta_dataset_toy_shape():
    meta = build_meta_dataset(toy_scenario(), rng_stream(9, 0))
    assert len(meta) == 20
    assert all(len(ds) == 8 for ds in meta.per_device)
    assert all(ds.labels.tolist() == [0, 1, 2, 3, 0, 1, 2, 3] for ds in meta.per_device)


def test_build_meta_dataset_realistic_shape():
    meta = build_meta_dataset(realistic_scenario(), rng_stream(9, 1))
    assert len(meta) == 20
    assert all(len(ds) == 32 for ds in meta.per_device)


def test_build_target_dataset_noiseless_exact():
    scen = toy_scenario()
    c = scen.constellation()
    dev = _noiseless(-1.0)
    ds = build_target_dataset(dev, scen, 2, rng_stream(9, 2))
    assert ds.labels.tolist() == [0, 1]
    assert np.array_equal(ds.received, -c.symbols[[0, 1]])


def test_build_target_dataset_rejects_zero_pilots():
    with pytest.raises(ValueError):
        build_target_dataset(_noiseless(1.0), toy_scenario(), 0, rng_stream(0, 0))


def test_dataset_take_and_features():
    ds = Dataset(np.array([0, 1, 2]), np.array([1 + 2j, -1j, 3 + 0j]))
    assert len(ds) == 3
    assert np.array_equal(ds.features, [[1, 2], [0, -1], [3, 0]])
    sub = ds.take(np.array([2, 0]))
    assert sub.labels.tolist() == [2, 0]
    assert sub.received.tolist() == [3 + 0j, 1 + 2j]


def test_dataclass_invariants():
    with pytest.raises(ValueError):
        Dataset(np.array([0]), np.array([1j, 2j]))
    with pytest.raises(ValueError):
        MetaDataset((Dataset(np.array([0]), np.array([1j])),), ())
    with pytest.raises(ValueError):
        ScenarioConfig(N=8, N_tr=3, N_te=4)
    with pytest.raises(ValueError):
        DeviceChannel(h=1.0, alpha=1.0, beta=0.0, noise_power=0.0)
    with pytest.raises(ValueError):
        DeviceChannel(h=1.0, alpha=1.0, beta=-0.1, noise_power=1.0)
