"""PROPI trace analysis: tail offset, signal area and spin-flip quanta."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import DomainError
from .evolution import ResetModel

UNSATURATED_THRESHOLD = 0.05


class OffsetEstimate(NamedTuple):
    offset: float
    sigma: float


class AreaResult(NamedTuple):
    raw_area: float
    quanta: float


@dataclass
class PropiResult:
    offset: float
    tail_sigma: float
    raw_area: float
    quanta: float
    corrected_quanta: float
    tail_points_used: int
    flags: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def estimate_offset(trace, tail_points: int = 30) -> OffsetEstimate:
    """Mean and standard deviation of the last ``tail_points`` samples."""
    trace = np.asarray(trace, dtype=float)
    if tail_points < 1 or tail_points >= len(trace):
        raise DomainError(f"need 1 <= tail_points < len(trace) (got {tail_points}, {len(trace)})")
    tail = trace[-tail_points:]
    return OffsetEstimate(float(tail.mean()), float(tail.std()))


def signal_area(trace, offset: float, full_flip_signal: float = 1.0) -> AreaResult:
    """Area between the trace and the offset, and its value in spin-flip quanta.

    With normalized fluorescence a complete NV flip in one readout changes
    the signal by ``full_flip_signal`` (1 for ideal calibration).
    """
    if not math.isfinite(offset):
        raise DomainError("offset must be finite")
    raw = float(np.sum(np.asarray(trace, dtype=float) - offset))
    return AreaResult(raw, raw / full_flip_signal)


def initialization_correction(quanta: float, reset: ResetModel = ResetModel(),
                              nuclear_register_factor: float = 1.0) -> float:
    """Divide out imperfect NV charge and spin initialization."""
    factors = (reset.p_charge, reset.p_spin, nuclear_register_factor)
    if any(not 0 < f <= 1 for f in factors):
        raise DomainError("correction factors must lie in (0, 1]")
    return quanta / (reset.p_charge * reset.p_spin * nuclear_register_factor)


def analyze_trace(trace, tail_points: int = 30, reset: Optional[ResetModel] = None,
                  nuclear_register_factor: float = 1.0) -> PropiResult:
    """Full PROPI analysis of one readout-phase trace.

    The run is flagged ``unsaturated`` when the relative tail spread exceeds
    5 %, because an unsaturated tail lifts the offset and undercounts quanta.
    """
    est = estimate_offset(trace, tail_points)
    area = signal_area(trace, est.offset)
    corrected = area.quanta if reset is None else initialization_correction(
        area.quanta, reset, nuclear_register_factor)
    flags = []
    scale = max(abs(est.offset), 1e-12)
    if est.sigma / scale > UNSATURATED_THRESHOLD and est.sigma > 1e-9:
        flags.append("unsaturated")
    return PropiResult(est.offset, est.sigma, area.raw_area, area.quanta, corrected, tail_points, flags)


def extract_oscillation_frequency(trace, dt: float, min_contrast: float = 3.0) -> float:
    """Dominant non-zero frequency (Hz) of a uniformly sampled series.

    The mean is removed, the power spectrum is computed with an 8x zero-padded
    FFT and the peak is refined by a parabola through the three highest bins.

    Raises:
        DomainError: if the peak power is below ``min_contrast`` times the
            median spectral power.
    """
    x = np.asarray(trace, dtype=float)
    x = x - x.mean()
    n = len(x)
    if n < 4:
        raise DomainError("series too short")
    nfft = 8 * n
    power = np.abs(np.fft.rfft(x, nfft)) ** 2
    freqs = np.fft.rfftfreq(nfft, dt)
    # ignore the DC lobe of the zero-padded transform
    start = 8
    k = start + int(np.argmax(power[start:]))
    if power[k] < min_contrast * np.median(power[1:]) or power[k] == 0:
        raise DomainError("no significant spectral peak")
    if 0 < k < len(power) - 1:
        a, b, c = power[k - 1], power[k], power[k + 1]
        denom = a - 2 * b + c
        # only a local maximum (denom < 0) gets a sub-bin correction
        shift = float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5)) if denom < 0 else 0.0
    else:
        shift = 0.0
    return float((k + shift) * (freqs[1] - freqs[0]))
