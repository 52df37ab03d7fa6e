#!/usr/bin/env python3
# Windows, spectra and the 126-value feature vector, one step at a time.

import numpy as np

from eeg_affect.data_ingest import SynthSpec, generate_synthetic
from eeg_affect.features import DEFAULT_BANDS, FEATURE_NAMES, band_powers, feature_matrix, fft, periodogram
from eeg_affect.segmentation import SegmentConfig, segment, window_count

np.set_printoptions(precision=4, suppress=True)

# one synthetic subject, 4 games, 10 s each at 128 Hz
sessions = generate_synthetic(SynthSpec(n_subjects=2, duration_s=10.0, seed=1))
rec = sessions[1].recording  # G2: alpha tone on every channel
print(rec.subject_id, rec.game_id, rec.channels.shape)

cfg = SegmentConfig()  # 500 ms, 50% overlap
w, hop = cfg.window_samples(rec.sampling_rate_hz), cfg.hop_samples(rec.sampling_rate_hz)
print("window", w, "hop", hop, "windows", window_count(rec.n_samples, w, hop))

windows = segment(rec, cfg)
print("last window padded by", windows[-1].padded_samples, "samples")

# the FFT agrees with the textbook DFT
x = windows[3].samples[0]
k = np.arange(64)
dft = np.exp(-2j * np.pi * np.outer(k, k) / 64) @ x
print("fft vs dft:", np.abs(fft(x) - dft).max())

freqs, P = periodogram(x, 128.0)
print("strongest bin at", freqs[P.argmax()], "Hz")
print("band powers", dict(zip([b.name for b in DEFAULT_BANDS], band_powers(x, DEFAULT_BANDS, 128.0))))

# pure tones: on-bin frequencies stay in their band, 10.5 Hz leaks
for f in (2.0, 6.0, 10.0, 10.5, 20.0):
    bp = band_powers(np.sin(2 * np.pi * f * np.arange(64) / 128), DEFAULT_BANDS, 128.0)
    print(f"{f:5.1f} Hz ->", bp / bp.sum())

X = feature_matrix(np.stack([win.samples for win in windows]), 128.0)
print("feature matrix", X.shape)
print(dict(zip(FEATURE_NAMES, X[3, :9])))  # channel 0 of window 3
