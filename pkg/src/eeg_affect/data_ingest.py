"""Loading GAMEEMO-layout recordings and generating synthetic sessions.

On-disk layout::

    <root>/<subject_id>/<game_id>.csv     header = 14 channel names, one sample per row
    <rating sidecar>.csv                  subject_id,game_id,boring,horrible,calm,funny

Synthetic exports use the same layout plus ``ratings.csv`` and
``synth_spec.json`` in the root.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    ChannelCountMismatch,
    ConfigError,
    MalformedCsv,
    MissingRating,
    NonFiniteSample,
    NonNumericRating,
    OutOfRangeRating,
)

log = logging.getLogger(__name__)

N_CHANNELS = 14
DEFAULT_FS = 128.0
GAMES = ("G1", "G2", "G3", "G4")
EMOTIONS = ("boring", "horrible", "calm", "funny")
RATING_MIN, RATING_MAX = 0.0, 10.0
RATING_HEADER = ("subject_id", "game_id") + EMOTIONS

# Emotiv EPOC montage used by GAMEEMO; names are carried along, never interpreted.
DEFAULT_CHANNEL_NAMES = (
    "AF3", "F7", "F3", "FC5", "T7", "P7", "O1",
    "O2", "P8", "T8", "FC6", "F4", "F8", "AF4",
)

# Which emotion each game is designed to elicit.
GAME_EMOTION = {"G1": "boring", "G2": "calm", "G3": "horrible", "G4": "funny"}


@dataclass(frozen=True)
class RawRecording:
    subject_id: str
    game_id: str
    channels: np.ndarray
    sampling_rate_hz: float = DEFAULT_FS
    channel_names: tuple = DEFAULT_CHANNEL_NAMES

    def __post_init__(self):
        if self.game_id not in GAMES:
            raise ConfigError(f"unknown game id {self.game_id!r}; expected one of {GAMES}")
        data = np.array(self.channels, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != N_CHANNELS:
            raise ChannelCountMismatch(
                f"{self.subject_id}/{self.game_id}: expected {N_CHANNELS} channels, "
                f"got array of shape {data.shape}"
            )
        if data.shape[1] < 1:
            raise MalformedCsv(f"{self.subject_id}/{self.game_id}: recording has no samples")
        if not np.isfinite(data).all():
            raise NonFiniteSample(f"{self.subject_id}/{self.game_id}: non-finite sample")
        if not self.sampling_rate_hz > 0:
            raise ConfigError("sampling_rate_hz must be positive")
        if len(self.channel_names) != N_CHANNELS:
            raise ChannelCountMismatch(f"expected {N_CHANNELS} channel names")
        data.flags.writeable = False
        object.__setattr__(self, "channels", data)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]


@dataclass(frozen=True)
class RatingVector:
    boring: float
    horrible: float
    calm: float
    funny: float

    def __post_init__(self):
        for name in EMOTIONS:
            value = float(getattr(self, name))
            if not (RATING_MIN <= value <= RATING_MAX):
                raise OutOfRangeRating(f"{name}={value} outside [{RATING_MIN:g}, {RATING_MAX:g}]")
            object.__setattr__(self, name, value)

    def as_array(self) -> np.ndarray:
        return np.array([self.boring, self.horrible, self.calm, self.funny])


@dataclass(frozen=True)
class SessionMeta:
    subject_id: str
    game_id: str
    source_path: str = ""
    synthetic: bool = False

    @property
    def key(self) -> tuple:
        return (self.subject_id, self.game_id)


class Session(NamedTuple):
    recording: RawRecording
    rating: RatingVector
    meta: SessionMeta


BAND_CENTERS = {"delta": 2.25, "theta": 6.0, "alpha": 10.5, "beta": 21.5}

DEFAULT_SIGNATURES = {
    "G1": ("delta", 1.0),
    "G2": ("alpha", 1.0),
    "G3": ("beta", 1.0),
    "G4": ("theta", 1.0),
}


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic dataset with one planted band per game."""

    n_subjects: int = 8
    duration_s: float = 60.0
    noise_sigma: float = 0.5
    signature_map: Mapping[str, tuple] = field(default_factory=lambda: dict(DEFAULT_SIGNATURES))
    seed: int = 0
    sampling_rate_hz: float = DEFAULT_FS
    dominant_rating: float = 9.0
    background_rating: float = 2.0
    gain_jitter: float = 0.2  # per subject x channel amplitude gain drawn from 1 +- jitter

    def __post_init__(self):
        if int(self.n_subjects) < 2:
            raise ConfigError("n_subjects must be >= 2")
        if not self.duration_s > 0:
            raise ConfigError("duration_s must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if not 0 <= self.gain_jitter < 1:
            raise ConfigError("gain_jitter must lie in [0, 1)")
        if not self.sampling_rate_hz > 0:
            raise ConfigError("sampling_rate_hz must be positive")
        sig = {}
        for game in GAMES:
            if game not in self.signature_map:
                raise ConfigError(f"signature_map is missing game {game}")
            band, amp = self.signature_map[game]
            if band not in BAND_CENTERS:
                raise ConfigError(f"unknown band {band!r} for {game}")
            if amp < 0:
                raise ConfigError(f"amplitude for {game} must be >= 0")
            sig[game] = (str(band), float(amp))
        extra = set(self.signature_map) - set(GAMES)
        if extra:
            raise ConfigError(f"signature_map has unknown games {sorted(extra)}")
        object.__setattr__(self, "signature_map", sig)
        RatingVector(self.dominant_rating, self.background_rating, 0.0, 0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["signature_map"] = {g: list(v) for g, v in self.signature_map.items()}
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthSpec":
        d = dict(d)
        if "signature_map" in d:
            d["signature_map"] = {g: tuple(v) for g, v in d["signature_map"].items()}
        return cls(**d)


def subject_name(i: int) -> str:
    return f"S{i + 1:02d}"


# ----------------------------------------------------------------------------
# parsing


def parse_rating_row(fields: Sequence[str] | str) -> RatingVector:
    """Parse the four rating columns ``boring,horrible,calm,funny``.

    Accepts either the four fields alone or a full sidecar row that still
    carries ``subject_id,game_id`` in front.
    """
    if isinstance(fields, str):
        fields = fields.split(",")
    fields = list(fields)
    if len(fields) == len(RATING_HEADER):
        fields = fields[2:]
    if len(fields) != len(EMOTIONS):
        raise MalformedCsv(f"expected {len(EMOTIONS)} rating fields, got {len(fields)}")
    values = []
    for name, text in zip(EMOTIONS, fields):
        try:
            value = float(text)
        except (TypeError, ValueError):
            raise NonNumericRating(f"{name}: {text!r} is not a number") from None
        if not math.isfinite(value):
            raise NonNumericRating(f"{name}: {text!r} is not a finite number")
        values.append(value)
    return RatingVector(*values)


def read_rating_sidecar(path) -> dict:
    """Map ``(subject_id, game_id) -> RatingVector``."""
    path = Path(path)
    ratings = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != RATING_HEADER:
            raise MalformedCsv(f"{path}:1: header must be {','.join(RATING_HEADER)}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(RATING_HEADER):
                raise MalformedCsv(
                    f"{path}:{reader.line_num}: expected {len(RATING_HEADER)} fields, got {len(row)}"
                )
            key = (row[0].strip(), row[1].strip())
            try:
                ratings[key] = parse_rating_row(row[2:])
            except (NonNumericRating, OutOfRangeRating) as exc:
                raise type(exc)(f"{path}:{reader.line_num}: {exc}") from None
    return ratings


def _scan_for_error(path: Path, lines: list) -> None:
    """Slow line-by-line pass that pinpoints why the fast parser refused a file."""
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != N_CHANNELS:
            raise MalformedCsv(
                f"{path}:{lineno}: expected {N_CHANNELS} fields, got {len(cells)}"
            )
        for col, cell in enumerate(cells):
            try:
                value = float(cell)
            except ValueError:
                raise MalformedCsv(f"{path}:{lineno}: column {col + 1}: {cell.strip()!r} is not a number") from None
            if not math.isfinite(value):
                raise NonFiniteSample(f"{path}:{lineno}: column {col + 1}: {cell.strip()!r}")
    raise MalformedCsv(f"{path}: unreadable sample data")


def read_recording_csv(path, subject_id: str, game_id: str, sampling_rate_hz: float = DEFAULT_FS) -> RawRecording:
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedCsv(f"{path}: not valid UTF-8 ({exc.reason})") from None
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise MalformedCsv(f"{path}:1: missing header row")
    names = [h.strip() for h in lines[0].split(",")]
    if len(names) != N_CHANNELS:
        raise ChannelCountMismatch(f"{path}:1: header has {len(names)} columns, expected {N_CHANNELS}")

    body = [ln for ln in lines[1:] if ln.strip()]
    if not body:
        raise MalformedCsv(f"{path}: no sample rows")
    try:
        data = np.loadtxt(body, delimiter=",", dtype=np.float64, ndmin=2, comments=None)
    except Exception:
        _scan_for_error(path, lines)
    if data.shape[1] != N_CHANNELS:
        _scan_for_error(path, lines)
    if not np.isfinite(data).all():
        _scan_for_error(path, lines)
    return RawRecording(subject_id, game_id, data.T, sampling_rate_hz, tuple(names))


def load_dataset(root_dir, rating_sidecar, sampling_rate_hz: float = DEFAULT_FS) -> list[Session]:
    """Load every ``<root>/<subject>/<game>.csv`` together with its rating row.

    Sessions come back sorted by (subject, game). Files whose stem is not a
    game id are skipped with a warning.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    found = []
    for subject_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for csv_path in sorted(subject_dir.glob("*.csv")):
            if csv_path.stem not in GAMES:
                log.warning("skipping %s: %r is not a game id", csv_path, csv_path.stem)
                continue
            found.append((subject_dir.name, csv_path.stem, csv_path))
    if not found:
        return []
    ratings = read_rating_sidecar(rating_sidecar)
    sessions = []
    for subject_id, game_id, csv_path in found:
        rating = ratings.get((subject_id, game_id))
        if rating is None:
            raise MissingRating(f"{csv_path}: no row for ({subject_id}, {game_id}) in {rating_sidecar}")
        rec = read_recording_csv(csv_path, subject_id, game_id, sampling_rate_hz)
        sessions.append(Session(rec, rating, SessionMeta(subject_id, game_id, str(csv_path), False)))
    return sessions


# ----------------------------------------------------------------------------
# synthetic data


def round_significant(x: np.ndarray, digits: int = 9) -> np.ndarray:
    """Round to ``digits`` significant decimal digits.

    Values produced this way survive a ``%.{digits}g`` text round trip bit for bit.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    nz = x != 0
    exp = np.floor(np.log10(np.abs(x[nz]))).astype(int)
    shift = digits - 1 - exp
    with np.errstate(over="ignore", invalid="ignore"):  # non-exact entries are overwritten below
        mant = np.round(x[nz] * 10.0 ** shift.astype(np.float64))
    # mantissa (< 1e9, exact) scaled by an exact power of ten is correctly rounded;
    # 10**k is only exact for |k| <= 22, so the rare remainder goes through text
    exact = np.abs(shift) <= 22
    pos = exact & (shift >= 0)
    neg = exact & (shift < 0)
    vals = np.empty_like(mant)
    vals[pos] = mant[pos] / 10.0 ** shift[pos].astype(np.float64)
    vals[neg] = mant[neg] * 10.0 ** (-shift[neg]).astype(np.float64)
    vals[~exact] = [float(f"{v:.{digits}g}") for v in x[nz][~exact]]
    out[nz] = vals
    return out


def synthetic_rating(game_id: str, spec: SynthSpec) -> RatingVector:
    dominant = GAME_EMOTION[game_id]
    values = {e: (spec.dominant_rating if e == dominant else spec.background_rating) for e in EMOTIONS}
    return RatingVector(**values)


def generate_synthetic(spec: SynthSpec) -> list[Session]:
    """Sinusoid at the game's band centre on every channel plus white noise.

    Each channel gets its own random phase, and each subject a fixed random
    per-channel gain (``gain_jitter = 0`` disables it). Samples are rounded to nine
    significant digits so that a CSV export reloads bit-identically.
    """
    rng = np.random.default_rng(spec.seed)
    fs = spec.sampling_rate_hz
    n = max(1, int(round(spec.duration_s * fs)))
    t = np.arange(n) / fs
    sessions = []
    for s in range(spec.n_subjects):
        subject = subject_name(s)
        gains = 1.0 + rng.uniform(-spec.gain_jitter, spec.gain_jitter, size=(N_CHANNELS, 1))
        for game in GAMES:
            band, amp = spec.signature_map[game]
            phases = rng.uniform(0.0, 2 * np.pi, size=(N_CHANNELS, 1))
            x = amp * gains * np.sin(2 * np.pi * BAND_CENTERS[band] * t[None, :] + phases)
            if spec.noise_sigma > 0:
                x = x + rng.normal(0.0, spec.noise_sigma, size=x.shape)
            rec = RawRecording(subject, game, round_significant(x), fs)
            meta = SessionMeta(subject, game, "", True)
            sessions.append(Session(rec, synthetic_rating(game, spec), meta))
    return sessions


def write_dataset(sessions: Iterable[Session], root_dir, spec: SynthSpec | None = None) -> Path:
    """Write sessions in the on-disk layout; ratings go to ``<root>/ratings.csv``."""
    root = Path(root_dir)
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for rec, rating, meta in sessions:
        d = root / rec.subject_id
        d.mkdir(exist_ok=True)
        np.savetxt(
            d / f"{rec.game_id}.csv", rec.channels.T, fmt="%.9g", delimiter=",",
            header=",".join(rec.channel_names), comments="",
        )
        rows.append([rec.subject_id, rec.game_id] + [f"{v:.9g}" for v in rating.as_array()])
    with (root / "ratings.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATING_HEADER)
        w.writerows(rows)
    if spec is not None:
        (root / "synth_spec.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    return root


def dataset_digest(sessions: Iterable[Session]) -> str:
    import hashlib

    h = hashlib.sha256()
    for rec, rating, meta in sessions:
        h.update(f"{rec.subject_id}/{rec.game_id}/{rec.sampling_rate_hz!r}".encode())
        h.update(np.ascontiguousarray(rec.channels).tobytes())
        h.update(rating.as_array().tobytes())
    return h.hexdigest()
