"""Synthetic I/Q windows for the four spectrum-occupancy classes.

Two users share the band: the desired user (QPSK, +0.01 cycles/sample offset)
and the interferer (BPSK, -0.02 cycles/sample offset), both with rectangular
pulses of 4 samples per symbol. A window holds noise plus whichever users are
active and is rescaled to unit mean power, so the classifier cannot lean on
received power and must use temporal and constellation structure instead.

Every function takes an explicit ``numpy.random.Generator``; give each worker
its own stream (e.g. ``np.random.default_rng(np.random.SeedSequence([seed, i]))``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

WINDOW_LENGTHS = (32, 128, 512)
INTERFERER_RATIO_RANGE_DB = (-5.0, 5.0)
TRAINING_SNR_RANGE_DB = (0.0, 20.0)

_QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2.0)
_BPSK = np.array([1.0 + 0j, -1.0 + 0j])
_CONSTELLATIONS = {"QPSK": _QPSK, "BPSK": _BPSK}


class SignalClass(enum.IntEnum):
    IDLE = 0
    D_ONLY = 1
    I_ONLY = 2
    BOTH = 3

    @property
    def desired_active(self) -> bool:
        return self in (SignalClass.D_ONLY, SignalClass.BOTH)

    @property
    def interferer_active(self) -> bool:
        return self in (SignalClass.I_ONLY, SignalClass.BOTH)


@dataclass(frozen=True)
class UserSignature:
    """Per-user RF fingerprint: modulation, normalized CFO, oversampling."""

    modulation: str
    cfo: float
    samples_per_symbol: int = 4

    def __post_init__(self):
        if self.modulation not in _CONSTELLATIONS:
            raise ValueError(f"unsupported modulation {self.modulation!r}")
        if not abs(self.cfo) < 0.5:
            raise ValueError(f"|cfo| must be < 0.5 cycles/sample, got {self.cfo}")
        if int(self.samples_per_symbol) != self.samples_per_symbol or self.samples_per_symbol < 1:
            raise ValueError("samples_per_symbol must be a positive integer")


DESIRED_SIGNATURE = UserSignature("QPSK", cfo=0.01, samples_per_symbol=4)
INTERFERER_SIGNATURE = UserSignature("BPSK", cfo=-0.02, samples_per_symbol=4)


@dataclass
class IqWindow:
    samples: np.ndarray  # complex128, shape (L,)
    label: Optional[SignalClass] = None

    def __len__(self) -> int:
        return len(self.samples)

    def as_channels(self) -> np.ndarray:
        """(2, L) float64 array, row 0 = I, row 1 = Q."""
        return np.stack([self.samples.real, self.samples.imag]).astype(np.float64)


def mean_power(seq: np.ndarray) -> float:
    return float(np.mean(np.abs(seq) ** 2))


def gen_symbols(signature: UserSignature, n: int, rng: np.random.Generator) -> np.ndarray:
    """Return ``n * samples_per_symbol`` unit-power samples with CFO applied."""
    if n < 0:
        raise ValueError("n must be non-negative")
    points = _CONSTELLATIONS[signature.modulation]
    symbols = points[rng.integers(0, len(points), size=n)]
    samples = np.repeat(symbols, signature.samples_per_symbol)
    if signature.cfo != 0.0:
        t = np.arange(samples.size)
        samples = samples * np.exp(2j * np.pi * signature.cfo * t)
    return samples


def complex_noise(n: int, variance: float, rng: np.random.Generator) -> np.ndarray:
    """Circularly symmetric complex Gaussian noise with E|w|^2 = variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def awgn(seq: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Add noise at ``snr_db`` relative to the empirical power of ``seq``."""
    seq = np.asarray(seq)
    if seq.size == 0:
        raise ValueError("awgn needs a non-empty sequence")
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    variance = mean_power(seq) / 10.0 ** (snr_db / 10.0)
    return seq + complex_noise(seq.size, variance, rng)


def mix(
    desired: Optional[np.ndarray],
    interferer: Optional[np.ndarray],
    power_ratio_db: float = 0.0,
    length: Optional[int] = None,
) -> np.ndarray:
    """Superimpose the interferer onto the desired signal.

    The interferer is scaled in amplitude by ``10**(power_ratio_db/20)``.
    A missing operand counts as zeros; if both are missing, ``length`` sets
    the size of the all-zero result.
    """
    if desired is None and interferer is None:
        if length is None:
            raise ValueError("mix needs at least one operand or an explicit length")
        return np.zeros(length, dtype=complex)
    if desired is not None and interferer is not None and len(desired) != len(interferer):
        raise ValueError(f"length mismatch: {len(desired)} vs {len(interferer)}")
    n = len(desired) if desired is not None else len(interferer)
    out = np.zeros(n, dtype=complex)
    if desired is not None:
        out += desired
    if interferer is not None:
        out += np.sqrt(10.0 ** (power_ratio_db / 10.0)) * np.asarray(interferer)
    return out


def normalize_power(seq: np.ndarray) -> np.ndarray:
    p = mean_power(seq)
    if not p > 0.0:
        raise ValueError("cannot normalize an all-zero sequence")
    return seq / np.sqrt(p)


def _symbols_for(signature: UserSignature, L: int, rng: np.random.Generator) -> np.ndarray:
    sps = signature.samples_per_symbol
    return gen_symbols(signature, -(-L // sps), rng)[:L]


def make_window(
    cls: SignalClass,
    L: int,
    snr_db: float,
    sig_d: UserSignature = DESIRED_SIGNATURE,
    sig_i: UserSignature = INTERFERER_SIGNATURE,
    rng: Optional[np.random.Generator] = None,
    power_ratio_db: Optional[float] = None,
) -> IqWindow:
    """Build one labeled, unit-power window of class ``cls``.

    For ``BOTH`` the interferer-to-desired power ratio is drawn uniformly from
    [-5, 5] dB unless ``power_ratio_db`` is given. Draw order from ``rng`` is
    fixed (desired symbols, interferer symbols, ratio, noise) so a seed pins
    the window exactly.
    """
    if L not in WINDOW_LENGTHS:
        raise ValueError(f"window length must be one of {WINDOW_LENGTHS}, got {L}")
    if rng is None:
        rng = np.random.default_rng()
    cls = SignalClass(cls)

    d = _symbols_for(sig_d, L, rng) if cls.desired_active else None
    i = _symbols_for(sig_i, L, rng) if cls.interferer_active else None
    if cls is SignalClass.BOTH and power_ratio_db is None:
        power_ratio_db = rng.uniform(*INTERFERER_RATIO_RANGE_DB)

    if cls is SignalClass.IDLE:
        raw = complex_noise(L, 1.0, rng)
    else:
        raw = awgn(mix(d, i, power_ratio_db or 0.0), snr_db, rng)
    return IqWindow(normalize_power(raw), cls)
