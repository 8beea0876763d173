"""Polarization cycles (NOVEL, ISE, DQT-NOVEL, DQT-ISE) and the PROPI run.

A cycle is a :class:`Sequence` of control segments that starts with a laser
reset and ends with a readout marker. :func:`run_propi` repeats a polarizing
cycle N times and a direction-inverted NOVEL cycle M times, recording the
normalized NV fluorescence at every marker.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import ConfigurationError, DomainError
from .evolution import (
    ControlSegment,
    DensityState,
    Frame,
    ResetModel,
    SegmentKind,
    evolve_segment,
    fluorescence,
    measure_nv,
)
from .hamiltonians import (
    DqtParams,
    SqtFrameParams,
    Transition,
    adiabaticity_factor,
    dqt_effective_rabi,
)
from .lattice_bath import SpinSystem

TWO_PI = 2.0 * math.pi

DEFAULT_PULSE_RABI = TWO_PI * 10e6
DEFAULT_PI_HALF = math.pi / (2 * DEFAULT_PULSE_RABI)
DEFAULT_PI = math.pi / DEFAULT_PULSE_RABI


class Direction(enum.IntEnum):
    UP = 1
    DOWN = -1

    @property
    def flipped(self) -> "Direction":
        return Direction(-int(self))


@dataclass(frozen=True)
class NovelParams:
    """Spin-lock cycle. ``rabi`` is the lock Rabi frequency (rad/s)."""

    rabi: float
    lock_duration: float = 10e-6
    direction: Direction = Direction.UP
    pi_half_duration: float = DEFAULT_PI_HALF
    transition: Transition = Transition.ZERO_TO_MINUS_ONE
    ideal_pulses: bool = False

    def __post_init__(self):
        if self.lock_duration < 0 or self.pi_half_duration <= 0:
            raise ConfigurationError("NOVEL durations must be positive")


@dataclass(frozen=True)
class IseParams:
    """Frequency-chirp cycle.

    ``f_range`` is in Hz and is swept in ``duration`` seconds, so the sweep
    rate is v = f_range/duration (Hz/s). ``center_offset`` is None to center
    on the exact resonance, or a manual offset from it in Hz.
    """

    f_range: float
    duration: float
    rabi: float
    center_offset: Optional[float] = None
    direction: Direction = Direction.UP
    transition: Transition = Transition.ZERO_TO_MINUS_ONE
    ideal_pulses: bool = False

    def __post_init__(self):
        if self.f_range < 0 or self.duration <= 0:
            raise ConfigurationError("ISE needs f_range >= 0 and duration > 0")

    @property
    def sweep_rate(self) -> float:
        return self.f_range / self.duration


@dataclass(frozen=True)
class DqtCycleParams:
    """Double-quantum variant of a NOVEL or ISE cycle.

    ``base.rabi`` is the per-tone drive amplitude Omega_SQT; the effective
    DQ Rabi frequency follows from Delta and alpha. ``effective`` selects the
    adiabatically eliminated two-level model instead of the three-level one.
    """

    base: Union[NovelParams, IseParams]
    Delta: float = TWO_PI * 40e6
    alpha: float = 1.0
    pi_pulse_duration: float = DEFAULT_PI
    effective: bool = False

    @property
    def direction(self) -> Direction:
        return self.base.direction

    @property
    def drive(self) -> DqtParams:
        return DqtParams(self.base.rabi, self.base.rabi, self.Delta, 0.0, self.alpha)

    @property
    def omega_eff(self) -> float:
        return dqt_effective_rabi(self.base.rabi, self.Delta, self.alpha)


@dataclass(frozen=True)
class Sequence:
    segments: tuple
    warnings: tuple = ()

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def n_readouts(self) -> int:
        return sum(1 for s in self.segments if s.kind is SegmentKind.READOUT)


def _start_sign(transition: Transition) -> int:
    """Pseudo-spin sign of |0> for the driven pair."""
    up, _ = transition.pseudo_spin
    return 1 if up == 0 else -1


def _sqt_pulse(transition, angle, duration, phase, ideal, label) -> ControlSegment:
    if ideal:
        return ControlSegment(SegmentKind.CONSTANT_DRIVE, 0.0, Frame.SQT,
                              SqtFrameParams(which_transition=transition), phase,
                              ideal_angle=angle, label=label)
    omega = angle / duration
    return ControlSegment(SegmentKind.CONSTANT_DRIVE, duration, Frame.SQT,
                          SqtFrameParams(Omega=omega, which_transition=transition), phase, label=label)


def _max_a_perp(system: SpinSystem) -> float:
    return max((abs(n.a_perp) for n in system.nuclei), default=0.0)


def build_novel_cycle(params: NovelParams, system: SpinSystem) -> Sequence:
    """Reset, pi/2, spin lock along y, pi/2, readout.

    The two pi/2 pulses share a phase, so without a flip-flop the NV ends in
    the driven level (dark) and a flip-flop leaves it in |0> (bright). The
    pi/2 phase puts the NV in the upper (UP) or lower (DOWN) dressed state.
    """
    warn = []
    if abs(params.rabi - system.larmor) > 10 * _max_a_perp(system):
        warn.append("Hartmann-Hahn mismatch exceeds 10 a_perp,max")
    tr = params.transition
    phase = math.pi if _start_sign(tr) * params.direction > 0 else 0.0
    half = _sqt_pulse(tr, math.pi / 2, params.pi_half_duration, phase, params.ideal_pulses, "pi/2")
    lock = ControlSegment(SegmentKind.CONSTANT_DRIVE, params.lock_duration, Frame.SQT,
                          SqtFrameParams(Omega=params.rabi, which_transition=tr), math.pi / 2, label="lock")
    segs = (ControlSegment(SegmentKind.LASER_RESET, label="laser"), half, lock, half,
            ControlSegment(SegmentKind.READOUT, label="readout"))
    return Sequence(segs, tuple(warn))


def build_ise_cycle(params: IseParams, system: SpinSystem) -> Sequence:
    """Reset, chirp of the detuning across the SQT resonance, readout.

    UP starts the sweep on the side where |0> is the upper dressed state, so
    reversing the sweep direction inverts the transfer.
    """
    warn = []
    if params.f_range > 0 and adiabaticity_factor(params.rabi, params.sweep_rate) < 0.1:
        warn.append("adiabaticity factor < 0.1, transfer will be negligible")
    center = 0.0 if params.center_offset is None else TWO_PI * params.center_offset
    half = TWO_PI * params.f_range / 2
    start = center + _start_sign(params.transition) * params.direction * half
    end = 2 * center - start
    chirp = ControlSegment(SegmentKind.CHIRP, params.duration, Frame.SQT,
                           SqtFrameParams(Omega=params.rabi, which_transition=params.transition),
                           0.0, sweep=(start, end), label="chirp")
    segs = (ControlSegment(SegmentKind.LASER_RESET, label="laser"), chirp,
            ControlSegment(SegmentKind.READOUT, label="readout"))
    return Sequence(segs, tuple(warn))


def _dqt_frame(params: DqtCycleParams, warn: list) -> Frame:
    if not params.drive.is_valid_effective:
        msg = "DQ drive violates Delta > Omega (adiabatic elimination invalid)"
        if params.effective:
            raise DomainError(msg)
        warn.append(msg)
    return Frame.DQT_EFFECTIVE if params.effective else Frame.DQT


def _framing_pi(params: DqtCycleParams) -> ControlSegment:
    return _sqt_pulse(Transition.ZERO_TO_MINUS_ONE, math.pi, params.pi_pulse_duration, 0.0,
                      params.base.ideal_pulses, "pi(0,-1)")


def build_dqt_novel_cycle(params: DqtCycleParams, system: SpinSystem) -> Sequence:
    """Reset, pi(0,-1), DQ pi/2, DQ spin lock, DQ pi/2, pi(0,-1), readout."""
    if not isinstance(params.base, NovelParams):
        raise ConfigurationError("DQT-NOVEL needs NovelParams as base")
    warn = []
    frame = _dqt_frame(params, warn)
    base = params.base
    omega_eff = params.omega_eff
    if abs(omega_eff - system.larmor) > 10 * 2 * _max_a_perp(system):
        warn.append("DQ Hartmann-Hahn mismatch exceeds 10 x (2 a_perp,max)")
    # NV starts in |-1>, the lower pseudo-spin state of the (+1, -1) pair
    phase = 0.0 if base.direction > 0 else math.pi
    drive = params.drive
    if base.ideal_pulses:
        half = ControlSegment(SegmentKind.CONSTANT_DRIVE, 0.0, frame, drive, phase,
                              ideal_angle=math.pi / 2, label="DQ pi/2")
    else:
        t_half = math.pi / (2 * omega_eff) if omega_eff > 0 else 0.0
        half = ControlSegment(SegmentKind.CONSTANT_DRIVE, t_half, frame, drive, phase, label="DQ pi/2")
    lock = ControlSegment(SegmentKind.CONSTANT_DRIVE, base.lock_duration, frame, drive, math.pi / 2,
                          label="DQ lock")
    pi = _framing_pi(params)
    segs = (ControlSegment(SegmentKind.LASER_RESET, label="laser"), pi, half, lock, half, pi,
            ControlSegment(SegmentKind.READOUT, label="readout"))
    return Sequence(segs, tuple(warn))


def build_dqt_ise_cycle(params: DqtCycleParams, system: SpinSystem) -> Sequence:
    """Reset, pi(0,-1), two-tone chirp of the DQ detuning, pi(0,-1), readout.

    Both tones are swept over ``f_range`` in opposite senses at fixed Delta,
    so the two-photon detuning delta covers +-f_range around the center.
    """
    if not isinstance(params.base, IseParams):
        raise ConfigurationError("DQT-ISE needs IseParams as base")
    warn = []
    frame = _dqt_frame(params, warn)
    base = params.base
    if base.f_range > 0 and adiabaticity_factor(params.omega_eff, 2 * base.sweep_rate) < 0.1:
        warn.append("adiabaticity factor < 0.1, transfer will be negligible")
    center = 0.0 if base.center_offset is None else TWO_PI * base.center_offset
    half = TWO_PI * base.f_range
    # |-1> is the pseudo-spin down state; UP starts where it is the upper one
    start = center - base.direction * half
    end = 2 * center - start
    chirp = ControlSegment(SegmentKind.CHIRP, base.duration, frame, params.drive, 0.0,
                           sweep=(start, end), label="DQ chirp")
    pi = _framing_pi(params)
    segs = (ControlSegment(SegmentKind.LASER_RESET, label="laser"), pi, chirp, pi,
            ControlSegment(SegmentKind.READOUT, label="readout"))
    return Sequence(segs, tuple(warn))


def build_cycle(params, system: SpinSystem) -> Sequence:
    if isinstance(params, NovelParams):
        return build_novel_cycle(params, system)
    if isinstance(params, IseParams):
        return build_ise_cycle(params, system)
    if isinstance(params, DqtCycleParams):
        if isinstance(params.base, NovelParams):
            return build_dqt_novel_cycle(params, system)
        return build_dqt_ise_cycle(params, system)
    raise ConfigurationError(f"unknown cycle parameters {type(params).__name__}")


def with_direction(params, direction: Direction):
    if isinstance(params, DqtCycleParams):
        return replace(params, base=replace(params.base, direction=direction))
    return replace(params, direction=direction)


def default_readout_cycle(system: SpinSystem, direction: Direction = Direction.DOWN) -> NovelParams:
    """NOVEL at the Hartmann-Hahn match with a 10 us lock."""
    return NovelParams(rabi=system.larmor, lock_duration=10e-6, direction=direction)


@dataclass(frozen=True)
class PropiPlan:
    """N polarizing cycles followed by M direction-inverted NOVEL cycles.

    ``readout_cycle`` defaults to Hartmann-Hahn NOVEL opposite to the
    polarizing direction. With ``repetitions`` > 1 the whole N+M block is
    repeated and only the last repetition is recorded, mimicking the
    steady state of averaged measurements.
    """

    n_polarize: int
    m_readout: int
    polarize_cycle: object
    readout_cycle: Optional[NovelParams] = None
    tail_points: int = 30
    repetitions: int = 1

    def __post_init__(self):
        if self.n_polarize < 0 or self.m_readout < 1:
            raise ConfigurationError("need N >= 0 and M >= 1")
        if not 1 <= self.tail_points < self.m_readout:
            raise ConfigurationError("tail_points must be >= 1 and < M")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be >= 1")


@dataclass
class PropiRecord:
    """Per-cycle traces of one PROPI run.

    ``bath_iz[k]`` holds the per-nucleus <I_z> after cycle k;
    ``initial_bath_iz`` holds it before the first recorded cycle.
    """

    phase: list
    fluorescence: np.ndarray
    p0: np.ndarray
    bath_iz: np.ndarray
    initial_bath_iz: np.ndarray
    final_state: Optional[DensityState] = None
    warnings: tuple = ()

    def _select(self, which: str, arr):
        mask = np.array([p == which for p in self.phase], dtype=bool)
        return arr[mask] if len(mask) else arr[:0]

    @property
    def n_trace(self) -> np.ndarray:
        return self._select("N", self.fluorescence)

    @property
    def m_trace(self) -> np.ndarray:
        return self._select("M", self.fluorescence)

    @property
    def bath_total(self) -> np.ndarray:
        return self.bath_iz.sum(axis=1) if self.bath_iz.size else np.zeros(len(self.phase))

    @property
    def bath_total_before_readout(self) -> float:
        """Total bath <I_z> at the end of the N phase."""
        n = len(self.n_trace)
        return float(self.bath_total[n - 1]) if n else float(self.initial_bath_iz.sum())

    def to_csv(self, path: Union[str, Path]) -> None:
        n_nuc = self.bath_iz.shape[1] if self.bath_iz.ndim == 2 else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cycle_index", "phase", "fluorescence", "p0", "bath_total_Iz"]
                       + [f"Iz_{j}" for j in range(n_nuc)])
            for k, ph in enumerate(self.phase):
                w.writerow([k, ph, repr(float(self.fluorescence[k])), repr(float(self.p0[k])),
                            repr(float(self.bath_total[k]))]
                           + [repr(float(x)) for x in self.bath_iz[k]])


def bath_polarization(state: DensityState):
    """Per-nucleus <I_z> in each nucleus' own frame, and their sum."""
    bath = state.bath_state()
    n = state.n_nuclei
    diag = np.real(np.diagonal(bath)).reshape((2,) * n) if n else np.zeros(0)
    per = np.empty(n)
    for j in range(n):
        axes = tuple(k for k in range(n) if k != j)
        marg = diag.sum(axis=axes) if axes else diag
        per[j] = 0.5 * (marg[0] - marg[1])
    return per, float(per.sum())


def _jittered(seq: Sequence, scale: float) -> list:
    out = []
    for seg in seq.segments:
        if seg.kind in (SegmentKind.CONSTANT_DRIVE, SegmentKind.CHIRP) and seg.ideal_angle is None:
            seg = replace(seg, amplitude_scale=seg.amplitude_scale * scale)
        out.append(seg)
    return out


def run_propi(system: SpinSystem, plan: PropiPlan, reset: ResetModel = ResetModel(),
              initial_bath: Optional[DensityState] = None, *, ideal: bool = False,
              contrast: float = 0.3, jitter: float = 0.0, seed=None,
              state_callback=None) -> PropiRecord:
    """Execute a PROPI experiment and record every readout.

    Args:
        initial_bath: starting state; its NV part is irrelevant since every
            cycle starts with a reset. Defaults to a maximally mixed bath.
        ideal: perfect NV initialization and charge state.
        jitter: relative half-width of the uniform per-cycle MW amplitude
            jitter applied to the polarizing cycles.
        seed: seed of the jitter generator.
        state_callback: optional ``f(cycle_index, phase, state)`` hook.
    """
    state = initial_bath if initial_bath is not None else DensityState.maximally_mixed(system.n_nuclei)
    if state.dim != system.dim:
        raise ConfigurationError("initial state does not match the spin system")
    pol_seq = build_cycle(plan.polarize_cycle, system)
    readout = plan.readout_cycle
    if readout is None:
        readout = default_readout_cycle(system, plan.polarize_cycle.direction.flipped)
    ro_seq = build_cycle(readout, system)
    rng = np.random.default_rng(seed)
    p_charge = 1.0 if ideal else reset.p_charge

    for _ in range(plan.repetitions):
        initial_iz = bath_polarization(state)[0]
        phases, fl, p0s, izs = [], [], [], []
        cycles = [("N", pol_seq)] * plan.n_polarize + [("M", ro_seq)] * plan.m_readout
        for k, (ph, seq) in enumerate(cycles):
            segments = seq.segments
            if jitter and ph == "N":
                segments = _jittered(seq, 1.0 + rng.uniform(-jitter, jitter))
            for seg in segments:
                if seg.kind is SegmentKind.READOUT:
                    pops = measure_nv(state)
                    phases.append(ph)
                    fl.append(fluorescence(pops, contrast, system.theta, p_charge))
                    p0s.append(pops.p_0)
                else:
                    state = evolve_segment(state, seg, system, reset, ideal_reset=ideal)
            izs.append(bath_polarization(state)[0])
            if state_callback is not None:
                state_callback(k, ph, state)

    return PropiRecord(
        phase=phases,
        fluorescence=np.asarray(fl),
        p0=np.asarray(p0s),
        bath_iz=np.asarray(izs).reshape(len(izs), system.n_nuclei),
        initial_bath_iz=initial_iz,
        final_state=state,
        warnings=pol_seq.warnings + ro_seq.warnings,
    )


def single_cycle_transfer(system: SpinSystem, cycle, initial: Optional[DensityState] = None,
                          reset: ResetModel = ResetModel.ideal(), ideal: bool = True):
    """Run one cycle and return (normalized signal, change of total bath <I_z>)."""
    state = initial if initial is not None else DensityState.maximally_mixed(system.n_nuclei)
    before = bath_polarization(state)[1]
    signal = None
    for seg in build_cycle(cycle, system).segments:
        if seg.kind is SegmentKind.READOUT:
            signal = fluorescence(measure_nv(state), 0.3, system.theta, 1.0 if ideal else reset.p_charge)
        else:
            state = evolve_segment(state, seg, system, reset, ideal_reset=ideal)
    return signal, bath_polarization(state)[1] - before
