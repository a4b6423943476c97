"""Complex-baseband QAM/PSK synthesis with transmitter IQ imbalance.

The impairment model is the frequency-independent transmitter imbalance on
the in-phase branch: in complex-baseband form a sample x = x_i + j*x_q maps
to

    z = (1 + alpha) * exp(j*theta) * x_i + j * x_q

where ``alpha`` is the linear gain imbalance and ``theta`` the phase
imbalance.  An ideal transmitter has alpha = 0, theta = 0.  Frame synthesis
chains: random symbols -> RRC pulse shaping at a fractional sample rate ->
unit-power normalization -> IQ imbalance -> frequency offset -> AWGN ->
crop at a random start offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import upfirdn

from .errors import ConfigurationError, NumericError
from .resample import resample_fractional
from .utils import derive_seed

QAM_ORDERS = (8, 16, 32, 64)
PSK_ORDERS = (2, 4, 8, 16)

DEFAULT_ROLLOFF = 0.35
FILTER_SPAN_SYMBOLS = 11
_BASE_SPS = 8            # integer rate for pulse shaping before resampling
_GUARD_SYMBOLS = FILTER_SPAN_SYMBOLS / 2 + 2.0   # shaping + resampler edges


@dataclass(frozen=True)
class ModulationScheme:
    """A modulation family plus order, e.g. QAM-16 or PSK-4."""

    family: str
    order: int

    def __post_init__(self):
        if self.family not in ("QAM", "PSK"):
            raise ConfigurationError(f"unknown modulation family {self.family!r}")
        valid = QAM_ORDERS if self.family == "QAM" else PSK_ORDERS
        if self.order not in valid:
            raise ConfigurationError(
                f"unsupported {self.family} order {self.order}; valid: {valid}")

    def __str__(self):
        return f"{self.family}{self.order}"


@dataclass(frozen=True)
class ImpairmentParams:
    """Per-frame transmitter and channel impairments.

    alpha        linear gain imbalance, in [-0.9, 0.9]
    theta_deg    phase imbalance in degrees, in [-10, 10]
    freq_offset  carrier offset as a fraction of the sample rate, in [-0.1, 0.1]
    sps          samples per symbol (real, > 1)
    snr_db       signal-to-noise ratio in dB, in [0, 35]
    """

    alpha: float
    theta_deg: float
    freq_offset: float
    sps: float
    snr_db: float

    def __post_init__(self):
        if not -0.9 <= self.alpha <= 0.9:
            raise ConfigurationError(f"alpha {self.alpha} outside [-0.9, 0.9]")
        if not -10.0 <= self.theta_deg <= 10.0:
            raise ConfigurationError(f"theta {self.theta_deg} outside [-10, 10] deg")
        if not -0.1 <= self.freq_offset <= 0.1:
            raise ConfigurationError(
                f"freq_offset {self.freq_offset} outside [-0.1, 0.1]")
        if not self.sps > 1.0:
            raise ConfigurationError(f"sps must exceed 1, got {self.sps}")
        if not 0.0 <= self.snr_db <= 35.0:
            raise ConfigurationError(f"snr_db {self.snr_db} outside [0, 35]")


@dataclass(frozen=True)
class IqFrame:
    """A fixed-length complex capture plus the ground truth that produced it."""

    samples: np.ndarray
    truth: ImpairmentParams
    scheme: ModulationScheme
    seed: int


@dataclass(frozen=True)
class FrameDebug:
    """Synthesis internals exposed for round-trip and calibration checks."""

    symbols: np.ndarray           # transmitted constellation points
    symbol_positions: np.ndarray  # fractional sample position of each symbol peak
    clean: np.ndarray             # noise-free copy of the cropped samples
    crop_start: int


@lru_cache(maxsize=None)
def build_constellation(scheme: ModulationScheme) -> np.ndarray:
    """Constellation points for ``scheme``, unit average power, Gray-coded
    where a standard Gray labeling exists.

    Returned array is read-only; index = symbol label.
    """
    m = scheme.order
    if scheme.family == "PSK":
        # place phase position p at label gray(p); QPSK offset by pi/4
        offset = np.pi / 4 if m == 4 else 0.0
        pts = np.empty(m, dtype=np.complex128)
        for p in range(m):
            pts[p ^ (p >> 1)] = np.exp(1j * (2 * np.pi * p / m + offset))
        # chop sub-epsilon dust so axis points are exact (BPSK = {+1, -1})
        pts.real[np.abs(pts.real) < 1e-12] = 0.0
        pts.imag[np.abs(pts.imag) < 1e-12] = 0.0
    elif m in (16, 64):
        side = int(math.isqrt(m))
        levels = np.arange(-(side - 1), side, 2, dtype=np.float64)
        bits = side.bit_length() - 1
        pts = np.empty(m, dtype=np.complex128)
        for i in range(side):
            for q in range(side):
                label = ((i ^ (i >> 1)) << bits) | (q ^ (q >> 1))
                pts[label] = levels[i] + 1j * levels[q]
    elif m == 8:
        # rectangular 2x4: four I levels, two Q levels
        i_levels = np.array([-3.0, -1.0, 1.0, 3.0])
        q_levels = np.array([-1.0, 1.0])
        pts = np.empty(8, dtype=np.complex128)
        for i in range(4):
            for q in range(2):
                label = ((i ^ (i >> 1)) << 1) | q
                pts[label] = i_levels[i] + 1j * q_levels[q]
    else:
        # cross 32QAM: 6x6 grid minus the four corners; no standard Gray map
        levels = np.arange(-5.0, 6.0, 2.0)
        pts = np.array([i + 1j * q for i in levels for q in levels
                        if not (abs(i) == 5 and abs(q) == 5)])
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    pts.flags.writeable = False
    return pts


def rrc_impulse(tau, rolloff: float):
    """Continuous root-raised-cosine pulse h(tau), tau in symbol periods.

    Unit-energy normalization: the matched-filter cascade h * h is a Nyquist
    pulse with peak 1, so integral of h^2 equals 1.
    """
    if not 0.0 < rolloff <= 1.0:
        raise ConfigurationError(f"rolloff must be in (0, 1], got {rolloff}")
    tau = np.asarray(tau, dtype=np.float64)
    beta = float(rolloff)
    out = np.empty_like(tau)

    at_zero = np.abs(tau) < 1e-10
    at_pole = np.abs(np.abs(tau) - 1.0 / (4 * beta)) < 1e-10
    regular = ~(at_zero | at_pole)

    out[at_zero] = 1.0 - beta + 4.0 * beta / np.pi
    out[at_pole] = (beta / np.sqrt(2.0)) * (
        (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
        + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta)))
    t = tau[regular]
    num = (np.sin(np.pi * t * (1.0 - beta))
           + 4.0 * beta * t * np.cos(np.pi * t * (1.0 + beta)))
    den = np.pi * t * (1.0 - (4.0 * beta * t) ** 2)
    out[regular] = num / den
    return out


@lru_cache(maxsize=8)
def _shaping_taps(rolloff: float, span: int) -> np.ndarray:
    n = span * _BASE_SPS
    tau = (np.arange(n + 1) - n / 2) / _BASE_SPS
    taps = rrc_impulse(tau, rolloff)
    taps = taps / np.sqrt(np.sum(taps ** 2))
    taps.flags.writeable = False
    return taps


def modulate(symbols: np.ndarray, sps: float, rolloff: float = DEFAULT_ROLLOFF,
             span: int = FILTER_SPAN_SYMBOLS) -> np.ndarray:
    """RRC pulse shaping of a symbol sequence at a fractional sample rate.

    Shapes at an integer base rate with an odd-length unit-energy RRC filter,
    then converts to ``sps`` samples per symbol with the polyphase fractional
    resampler.  Output average power is normalized to 1.0, measured over the
    filled region (edge transients excluded when the sequence is long enough
    to have one).  Symbol k peaks near output index (k + span/2) * sps.
    """
    symbols = np.asarray(symbols)
    if symbols.size == 0:
        raise ConfigurationError("cannot modulate an empty symbol sequence")
    if not sps > 1.0:
        raise ConfigurationError(f"sps must exceed 1, got {sps}")
    taps = _shaping_taps(float(rolloff), int(span))
    shaped = upfirdn(taps, symbols.astype(np.complex128), up=_BASE_SPS)
    out = resample_fractional(shaped, sps / _BASE_SPS, cutoff=0.25, half_width=8)
    guard = int(np.ceil(_GUARD_SYMBOLS * sps))
    steady = out[guard:out.size - guard]
    power = np.mean(np.abs(steady if steady.size else out) ** 2)
    return out / np.sqrt(power)


def apply_iq_imbalance(signal: np.ndarray, alpha: float,
                       theta_deg: float) -> np.ndarray:
    """Transmitter IQ imbalance on the in-phase branch.

    Per-sample map: out = (1 + alpha) * exp(j*theta) * Re(x) + j * Im(x).
    Total function; (alpha=0, theta=0) is the identity.
    """
    signal = np.asarray(signal)
    rot = (1.0 + alpha) * np.exp(1j * np.deg2rad(theta_deg))
    return rot * signal.real + 1j * signal.imag


def apply_freq_offset(signal: np.ndarray, f_norm: float) -> np.ndarray:
    """Multiply sample n by exp(j*2*pi*f_norm*n); magnitudes are preserved."""
    signal = np.asarray(signal)
    if not abs(f_norm) <= 0.5:
        raise ConfigurationError(f"|f_norm| must be <= 0.5, got {f_norm}")
    n = np.arange(signal.size)
    return signal * np.exp(2j * np.pi * f_norm * n)


def add_awgn(signal: np.ndarray, snr_db: float, rng_seed: int) -> np.ndarray:
    """Add circularly symmetric complex Gaussian noise at the requested SNR.

    Noise variance is P_sig / 10^(snr_db/10) with P_sig measured from the
    input, split equally between the real and imaginary parts.  Infinite
    SNR returns an unmodified copy; deterministic given ``rng_seed``.
    """
    signal = np.asarray(signal)
    if signal.size == 0:
        raise ConfigurationError("cannot add noise to an empty signal")
    if np.isinf(snr_db) and snr_db > 0:
        return signal.copy()
    p_sig = float(np.mean(np.abs(signal) ** 2))
    if p_sig == 0.0:
        raise NumericError("zero-power signal: SNR is undefined")
    sigma2 = p_sig * 10.0 ** (-snr_db / 10.0)
    rng = np.random.default_rng(rng_seed)
    noise = rng.normal(scale=np.sqrt(sigma2 / 2.0), size=(2, signal.size))
    return signal + noise[0] + 1j * noise[1]


def synthesize_frame(scheme: ModulationScheme, params: ImpairmentParams,
                     n_samples: int, seed: int, return_debug: bool = False):
    """Generate one impaired capture of ``n_samples`` raw IQ samples.

    Deterministic given ``seed``.  The generator over-produces, trims filter
    transients, then crops at a random start offset so frames simulate an
    imperfect detection stage without transient contamination.
    """
    if n_samples <= 0:
        raise ConfigurationError("n_samples must be positive")
    sps = params.sps
    margin = 256
    guard = int(np.ceil(_GUARD_SYMBOLS * sps))
    n_sym = int(np.ceil((n_samples + margin + 2 * guard) / sps)) + FILTER_SPAN_SYMBOLS

    constellation = build_constellation(scheme)
    rng_sym = np.random.default_rng(derive_seed(seed, 0))
    symbols = constellation[rng_sym.integers(0, scheme.order, size=n_sym)]

    shaped = modulate(symbols, sps)
    steady = shaped[guard:shaped.size - guard]
    if steady.size < n_samples:
        raise NumericError("internal error: generator under-produced")

    z = apply_iq_imbalance(steady, params.alpha, params.theta_deg)
    z = apply_freq_offset(z, params.freq_offset)
    noisy = add_awgn(z, params.snr_db, derive_seed(seed, 1))

    rng_crop = np.random.default_rng(derive_seed(seed, 2))
    start = int(rng_crop.integers(0, steady.size - n_samples + 1))
    samples = noisy[start:start + n_samples].astype(np.complex64)
    if not np.all(np.isfinite(samples.view(np.float32))):
        raise NumericError("synthesized frame contains non-finite samples")

    frame = IqFrame(samples=samples, truth=params, scheme=scheme, seed=seed)
    if not return_debug:
        return frame
    positions = ((np.arange(n_sym) + FILTER_SPAN_SYMBOLS / 2) * sps
                 - guard - start)
    debug = FrameDebug(symbols=symbols, symbol_positions=positions,
                       clean=z[start:start + n_samples].copy(), crop_start=start)
    return frame, debug


def matched_filter_demod(samples: np.ndarray, sps: float, positions: np.ndarray,
                         rolloff: float = DEFAULT_ROLLOFF,
                         span: int = FILTER_SPAN_SYMBOLS) -> np.ndarray:
    """Correlate against the RRC pulse at the given symbol positions.

    ``positions`` are fractional sample indices of symbol peaks; every
    requested window must lie inside the signal.  With clean input this
    recovers the transmitted symbols up to the modulator's power scale.
    """
    samples = np.asarray(samples)
    half = span / 2.0
    w = int(np.ceil(half * sps))
    positions = np.asarray(positions, dtype=np.float64)
    centers = np.rint(positions).astype(np.int64)
    if np.any(centers - w < 0) or np.any(centers + w >= samples.size):
        raise ConfigurationError("matched-filter window exceeds the signal")
    offsets = np.arange(-w, w + 1)
    idx = centers[:, None] + offsets[None, :]
    tau = (idx - positions[:, None]) / sps
    taps = np.where(np.abs(tau) <= half, rrc_impulse(tau.ravel(), rolloff)
                    .reshape(tau.shape), 0.0)
    return np.einsum("ij,ij->i", samples[idx], taps) / sps
