import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from eeg_affect.data_ingest import N_CHANNELS, SessionMeta
from eeg_affect.errors import BandAboveNyquist, EmptyTrainingSet
from eeg_affect.features import (
    DEFAULT_BANDS,
    FEATURE_NAMES,
    BandDefinition,
    FeatureVector,
    NormalizationStats,
    apply_normalization,
    band_power,
    band_powers,
    extract_features,
    feature_columns,
    feature_matrix,
    fft,
    fit_normalization,
    next_pow2,
    periodogram,
    read_feature_csv,
    time_stats,
    write_feature_csv,
)
from eeg_affect.segmentation import Window

FS = 128.0


def dft(x):
    n = len(x)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


def tone(f, n=64, fs=FS, phase=0.0):
    return np.sin(2 * np.pi * f * np.arange(n) / fs + phase)


def test_fft_small_examples():
    np.testing.assert_allclose(fft([1, 0, 0, 0]), [1, 1, 1, 1], atol=1e-15)
    np.testing.assert_allclose(fft([1, 1, 1, 1]), [4, 0, 0, 0], atol=1e-15)
    assert fft([3.0]).tolist() == [3.0]


@pytest.mark.parametrize("n", [2, 8, 64, 256])
def test_fft_matches_direct_dft(rng, n):
    x = rng.normal(size=n)
    assert np.max(np.abs(fft(x) - dft(x))) < 1e-9


def test_fft_zero_pad_and_batch(rng):
    x = rng.normal(size=(3, 5, 50))
    X = fft(x, 64)
    padded = np.concatenate([x, np.zeros((3, 5, 14))], axis=-1)
    for i in range(3):
        for j in range(5):
            assert np.max(np.abs(X[i, j] - dft(padded[i, j]))) < 1e-9
    with pytest.raises(ValueError):
        fft(x, 48)
    with pytest.raises(ValueError):
        fft(x, 32)


@given(arrays(np.float64, st.sampled_from([4, 16, 32]), elements=st.floats(-1e3, 1e3)))
def test_parseval(x):
    X = fft(x)
    assert np.isclose((np.abs(X) ** 2).sum() / len(x), (x ** 2).sum(), rtol=1e-9, atol=1e-9)


def test_next_pow2():
    assert [next_pow2(n) for n in (1, 2, 3, 64, 65)] == [1, 2, 4, 64, 128]


def test_periodogram_scaling():
    x = tone(10)
    freqs, P = periodogram(x, FS)
    assert len(freqs) == 33 and freqs[5] == 10.0
    # |X[5]| = n/2 for a unit sine on bin 5
    assert np.isclose(P[5], (32 ** 2) / (64 * FS))
    assert np.isclose(P.sum() - P[5], 0, atol=1e-20)


@pytest.mark.parametrize("f, band", [(2, "delta"), (6, "theta"), (10, "alpha"), (20, "beta")])
def test_on_bin_tone_lands_in_band(f, band):
    bp = band_powers(tone(f), DEFAULT_BANDS, FS)
    names = [b.name for b in DEFAULT_BANDS]
    assert bp[names.index(band)] / bp.sum() >= 0.95


def test_band_power_zero_and_nyquist():
    for b in DEFAULT_BANDS:
        assert band_power(np.zeros(64), b, FS) == 0.0
    with pytest.raises(BandAboveNyquist):
        band_power(np.zeros(64), DEFAULT_BANDS[3], 60.0)
    with pytest.raises(ValueError):
        BandDefinition("bad", 5.0, 4.0)


def test_band_power_equals_bin_sum(rng):
    x = rng.normal(size=64)
    X = dft(x)
    P = np.abs(X[:33]) ** 2 / (64 * FS)
    f = np.arange(33) * 2.0
    for b in DEFAULT_BANDS:
        ref = P[(f >= b.low_hz) & (f < b.high_hz)].sum()
        assert np.isclose(band_power(x, b, FS), ref, rtol=1e-12)


def test_time_stats_examples():
    assert time_stats([5, 5, 5, 5]) == (5.0, 0.0, 0.0, 0.0, 0.0)
    m, s, _, sk, ku = time_stats([-1, 1] * 8)
    assert (m, s, sk) == (0.0, 1.0, 0.0) and np.isclose(ku, -2.0)
    # 16 samples hitting each histogram bin once
    x = np.arange(16) + 0.5
    assert np.isclose(time_stats(x)[2], 4.0)
    assert np.isclose(time_stats([0, 0, 0, 1])[2], -(0.75 * np.log2(0.75) + 0.25 * np.log2(0.25)))


@given(arrays(np.float64, st.integers(2, 50), elements=st.floats(-1e3, 1e3)))
def test_time_stats_against_reference_formulas(x):
    m, s, e, sk, ku = time_stats(x)
    assert np.isclose(m, np.mean(x), atol=1e-9)
    assert np.isclose(s, np.std(x), atol=1e-9)
    assert 0.0 <= e <= 4.0 + 1e-12
    if np.var(x) > 1e-6:
        d = x - x.mean()
        m2 = (d ** 2).mean()
        assert np.isclose(sk, (d ** 3).mean() / m2 ** 1.5, rtol=1e-6, atol=1e-9)
        assert np.isclose(ku, (d ** 4).mean() / m2 ** 2 - 3, rtol=1e-6, atol=1e-9)
        assert ku >= -2.0 - 1e-9


def _window(samples):
    return Window(np.asarray(samples, dtype=float), SessionMeta("S01", "G1"), 0, 0)


def test_extract_features_layout():
    assert len(FEATURE_NAMES) == 9
    cols = feature_columns()
    assert len(cols) == 126 and cols[0] == "c00_mean" and cols[8] == "c00_P_beta"
    zero = extract_features(_window(np.zeros((N_CHANNELS, 64))))
    assert zero.values.shape == (126,) and not zero.values.any()
    assert zero.window_ref == ("S01", "G1", 0)

    w = np.zeros((N_CHANNELS, 64))
    w[0] = tone(10)
    v = extract_features(_window(w)).values
    assert np.flatnonzero(v).max() <= 8
    assert np.argmax(v[5:9]) == 2  # alpha


def test_channel_permutation_permutes_blocks(rng):
    w = rng.normal(size=(N_CHANNELS, 64))
    perm = rng.permutation(N_CHANNELS)
    a = feature_matrix(w[None], FS)[0].reshape(N_CHANNELS, 9)
    b = feature_matrix(w[perm][None], FS)[0].reshape(N_CHANNELS, 9)
    np.testing.assert_array_equal(a[perm], b)


def test_normalization(rng):
    X = rng.normal(3.0, 2.0, size=(50, 6))
    X[:, 2] = 7.0
    stats = fit_normalization(X)
    Z = apply_normalization(X, stats)
    assert np.abs(Z.mean(axis=0)).max() < 1e-9
    live = ~stats.constant
    assert np.allclose(Z[:, live].std(axis=0), 1.0, atol=1e-9)
    assert (Z[:, 2] == 0).all()
    single = fit_normalization([FeatureVector(X[0])])
    out = apply_normalization(FeatureVector(X[0]), single)
    assert isinstance(out, FeatureVector) and not out.values.any()
    with pytest.raises(EmptyTrainingSet):
        fit_normalization([])


def test_normalization_and_feature_csv_roundtrip(tmp_path, rng):
    X = rng.normal(size=(5, 126)) * 10 ** rng.uniform(-20, 20, size=(5, 126))
    stats = fit_normalization(X)
    stats.save(tmp_path / "s.json")
    back = NormalizationStats.load(tmp_path / "s.json")
    np.testing.assert_array_equal(back.mean, stats.mean)
    np.testing.assert_array_equal(back.std, stats.std)
    assert json.loads((tmp_path / "s.json").read_text())["epsilon"] == 1e-12
    keys = [("S01", "G1", i) for i in range(5)]
    write_feature_csv(tmp_path / "f.csv", keys, X)
    k2, X2 = read_feature_csv(tmp_path / "f.csv")
    assert k2 == keys
    np.testing.assert_array_equal(X2, X)
