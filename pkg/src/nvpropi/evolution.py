"""Density-matrix propagation under piecewise-constant and chirped controls.

Besides unitary segments, this module implements the optical NV reset (which
acts on the NV tensor factor only, leaving the bath untouched) and the
expectation-value readout of NV populations.
"""

from __future__ import annotations

import enum
import functools
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Optional, Union

import numpy as np

from .errors import ConfigurationError, DomainError
from .hamiltonians import (
    NV_INDEX,
    DqtParams,
    SqtFrameParams,
    dqt_effective_hamiltonian,
    dqt_effective_parameters,
    dqt_interaction_hamiltonian,
    nv_ket_bra,
    nv_operator,
    sqt_rotating_hamiltonian,
    Transition,
)
from .lattice_bath import SpinSystem

TWO_PI = 2.0 * math.pi


class SegmentKind(enum.Enum):
    CONSTANT_DRIVE = "constant"
    CHIRP = "chirp"
    LASER_RESET = "reset"
    WAIT = "wait"
    READOUT = "readout"


class Frame(enum.Enum):
    SQT = "sqt"
    DQT = "dqt"
    DQT_EFFECTIVE = "dqt_effective"


@dataclass(frozen=True)
class ChirpDiscretization:
    """Substep rule for chirps: the detuning changes by at most
    min(Omega/10, max_detuning_step) per substep and substeps last at most
    ``max_substep`` seconds."""

    max_detuning_step: float = TWO_PI * 100e3
    max_substep: float = 20e-9
    rabi_fraction: float = 0.1


@dataclass(frozen=True)
class ControlSegment:
    """One interval of a pulse sequence.

    Attributes:
        kind: what the interval does.
        duration: length in seconds (zero for resets and markers).
        frame: which rotating frame ``params`` refer to.
        params: SqtFrameParams or DqtParams.
        phase: drive phase in radians.
        sweep: for chirps, (start, end) of the swept detuning in rad/s;
            Delta for SQT frames, delta for DQ frames.
        ideal_angle: if set, the segment is an instantaneous NV-only
            rotation by this angle about the phase axis (duration ignored).
        amplitude_scale: multiplicative drive amplitude factor (jitter).
        label: free-form tag used in sequence listings.
    """

    kind: SegmentKind
    duration: float = 0.0
    frame: Frame = Frame.SQT
    params: Union[SqtFrameParams, DqtParams, None] = None
    phase: float = 0.0
    sweep: Optional[tuple] = None
    ideal_angle: Optional[float] = None
    amplitude_scale: float = 1.0
    discretization: ChirpDiscretization = ChirpDiscretization()
    label: str = ""

    def __post_init__(self):
        if self.duration < 0:
            raise ConfigurationError("segment duration must be >= 0")
        if self.kind is SegmentKind.CHIRP:
            if self.sweep is None or not all(math.isfinite(x) for x in self.sweep):
                raise ConfigurationError("chirp requires finite (start, end) detunings")

    @property
    def sweep_rate(self) -> float:
        """df/dt in Hz/s for chirps, 0 otherwise."""
        if self.kind is not SegmentKind.CHIRP or self.duration == 0:
            return 0.0
        return (self.sweep[1] - self.sweep[0]) / TWO_PI / self.duration


@dataclass(frozen=True)
class ResetModel:
    """Laser initialization fidelities: NV- charge probability and m_s=0
    probability given NV-."""

    p_charge: float = 0.70
    p_spin: float = 0.92

    def __post_init__(self):
        for p in (self.p_charge, self.p_spin):
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError("reset probabilities must lie in [0, 1]")

    @classmethod
    def ideal(cls) -> "ResetModel":
        return cls(1.0, 1.0)

    @property
    def is_ideal(self) -> bool:
        return self.p_charge == 1.0 and self.p_spin == 1.0

    @property
    def p_eff(self) -> float:
        return self.p_charge * self.p_spin


@dataclass
class DensityState:
    """Density matrix on NV (x) bath.

    ``rho`` is owned by this object; operations return new states.
    """

    rho: np.ndarray
    n_nuclei: int

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def basis_labels(self) -> list:
        labels = []
        for m in (+1, 0, -1):
            for k in range(2**self.n_nuclei):
                bits = format(k, f"0{self.n_nuclei}b") if self.n_nuclei else ""
                spins = "".join("u" if b == "0" else "d" for b in bits)
                labels.append(f"{m:+d}|{spins}")
        return labels

    @classmethod
    def from_bath(cls, nv_level: int, bath_rho: np.ndarray) -> "DensityState":
        bath_rho = np.asarray(bath_rho, dtype=complex)
        n = int(round(math.log2(bath_rho.shape[0])))
        return cls(np.kron(nv_ket_bra(nv_level, nv_level), bath_rho), n)

    @classmethod
    def maximally_mixed(cls, n_nuclei: int, nv_level: int = 0) -> "DensityState":
        d = 2**n_nuclei
        return cls.from_bath(nv_level, np.eye(d) / d)

    @classmethod
    def polarized(cls, polarizations, nv_level: int = 0) -> "DensityState":
        """Product bath with per-nucleus <I_z> = p_j/2 (p_j in [-1, 1])."""
        bath = np.ones((1, 1), dtype=complex)
        for p in polarizations:
            bath = np.kron(bath, np.diag([(1 + p) / 2, (1 - p) / 2]))
        return cls.from_bath(nv_level, bath)

    def bath_state(self) -> np.ndarray:
        """Partial trace over the NV."""
        d = 2**self.n_nuclei
        r = self.rho.reshape(3, d, 3, d)
        return np.einsum("iaib->ab", r)

    def check(self, tol: float = 1e-10) -> None:
        """Raise DomainError unless rho is Hermitian, unit-trace and positive."""
        rho = self.rho
        norm = np.linalg.norm(rho)
        if np.linalg.norm(rho - rho.conj().T) > tol * norm:
            raise DomainError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > tol:
            raise DomainError(f"trace {np.trace(rho).real:.15f} differs from 1")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
            raise DomainError("density matrix has a negative eigenvalue")


class NvPopulations(NamedTuple):
    p_0: float
    p_plus: float
    p_minus: float


def propagator(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) for Hermitian H via eigendecomposition."""
    if t < 0:
        raise DomainError("propagation time must be non-negative")
    norm = np.linalg.norm(h)
    if np.linalg.norm(h - h.conj().T) > 1e-10 * max(norm, 1e-300):
        raise DomainError("Hamiltonian is not Hermitian")
    if t == 0 or norm == 0:
        return np.eye(h.shape[0], dtype=complex)
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def segment_hamiltonian(segment: ControlSegment, system: SpinSystem, detuning: Optional[float] = None) -> np.ndarray:
    """Hamiltonian of a drive/wait segment; ``detuning`` overrides the swept one."""
    params = segment.params
    frame = segment.frame
    if params is None:
        params = SqtFrameParams()
    elif segment.kind is SegmentKind.WAIT:
        if isinstance(params, SqtFrameParams):
            params = replace(params, Omega=0.0)
        else:
            params = replace(params, Omega_p1=0.0, Omega_m1=0.0)
    s = segment.amplitude_scale
    if isinstance(params, SqtFrameParams):
        params = replace(params, Omega=params.Omega * s)
        if detuning is not None:
            params = replace(params, Delta=detuning)
        return sqt_rotating_hamiltonian(system, params, segment.phase)
    params = replace(params, Omega_p1=params.Omega_p1 * s, Omega_m1=params.Omega_m1 * s)
    if detuning is not None:
        params = replace(params, delta=detuning)
    if frame is Frame.DQT_EFFECTIVE:
        return dqt_effective_hamiltonian(system, params, segment.phase)
    return dqt_interaction_hamiltonian(system, params, segment.phase)


def chirp_detunings(segment: ControlSegment) -> tuple:
    """Midpoint detunings and substep length of a chirp segment."""
    start, end = segment.sweep
    disc = segment.discretization
    params = segment.params
    if isinstance(params, SqtFrameParams):
        gap = params.Omega * segment.amplitude_scale
    else:
        scaled = replace(params, Omega_p1=params.Omega_p1 * segment.amplitude_scale,
                         Omega_m1=params.Omega_m1 * segment.amplitude_scale)
        gap = dqt_effective_parameters(scaled)[0] if scaled.is_valid_effective else 0.0
    step = disc.max_detuning_step
    if gap > 0:
        step = min(step, disc.rabi_fraction * gap)
    n = max(1, math.ceil(abs(end - start) / step - 1e-9), math.ceil(segment.duration / disc.max_substep - 1e-9))
    edges = np.linspace(start, end, n + 1)
    return 0.5 * (edges[:-1] + edges[1:]), segment.duration / n


def _ideal_rotation(segment: ControlSegment, n_nuclei: int) -> np.ndarray:
    if segment.frame is Frame.SQT:
        trans = segment.params.which_transition if segment.params is not None else Transition.ZERO_TO_MINUS_ONE
        up, down = trans.pseudo_spin
    else:
        up, down = +1, -1
    # exp(-i angle (sigma_x cos + sigma_y sin)) on the pair, identity elsewhere
    a = 0.5 * segment.ideal_angle
    u = np.eye(3, dtype=complex)
    iu, idn = NV_INDEX[up], NV_INDEX[down]
    u[iu, iu] = u[idn, idn] = math.cos(a)
    u[iu, idn] = -1j * math.sin(a) * np.exp(-1j * segment.phase)
    u[idn, iu] = -1j * math.sin(a) * np.exp(1j * segment.phase)
    return nv_operator(u, n_nuclei)


@functools.lru_cache(maxsize=512)
def segment_unitary(segment: ControlSegment, system: SpinSystem) -> np.ndarray:
    """Propagator of a unitary segment; cached since cycles repeat segments."""
    if segment.kind in (SegmentKind.LASER_RESET, SegmentKind.READOUT):
        raise ConfigurationError(f"{segment.kind} is not a unitary segment")
    if segment.ideal_angle is not None:
        u = _ideal_rotation(segment, system.n_nuclei)
    elif segment.kind is SegmentKind.CHIRP:
        detunings, dt = chirp_detunings(segment)
        # every frame is affine in the swept detuning
        h0 = segment_hamiltonian(segment, system, 0.0)
        h1 = segment_hamiltonian(segment, system, 1.0) - h0
        u = np.eye(system.dim, dtype=complex)
        for d in detunings:
            u = propagator(h0 + d * h1, dt) @ u
    else:
        u = propagator(segment_hamiltonian(segment, system), segment.duration)
    u.flags.writeable = False
    return u


def laser_reset(state: DensityState, model: ResetModel = ResetModel(), ideal: bool = False) -> DensityState:
    """Re-initialize the NV factor, keeping the bath reduced state.

    The NV is set to p_spin |0><0| + (1 - p_spin)/2 (|+1><+1| + |-1><-1|).
    The charge-state fraction does not enter the dynamics; it only reduces
    fluorescence contrast (see :func:`fluorescence`). NV-bath coherences
    are erased; coherences within the bath are preserved.
    """
    p_spin = 1.0 if ideal else model.p_spin
    nv = np.diag([(1 - p_spin) / 2, p_spin, (1 - p_spin) / 2]).astype(complex)
    return DensityState(np.kron(nv, state.bath_state()), state.n_nuclei)


def measure_nv(state: DensityState) -> NvPopulations:
    d = 2**state.n_nuclei
    diag = np.real(np.diagonal(state.rho)).reshape(3, d).sum(axis=1)
    return NvPopulations(p_0=float(diag[1]), p_plus=float(diag[0]), p_minus=float(diag[2]))


def misalignment_contrast_factor(theta: float, reference_angle: float = math.radians(5.0),
                                 reference_factor: float = 0.1) -> float:
    """ODMR contrast reduction for a misaligned field: 1 at theta=0, equal to
    ``reference_factor`` at ``reference_angle``, log-linear in between."""
    return reference_factor ** (theta / reference_angle)


def fluorescence(populations: NvPopulations, contrast: float = 0.3, theta: float = 0.0,
                 p_charge: float = 1.0) -> float:
    """Normalized NV fluorescence.

    The raw signal is 1 - c (p_plus + p_minus) for the NV- fraction and a
    contrast-free constant for the NV0 fraction, with c the contrast reduced
    by misalignment. It is rescaled so that an ideal fresh reset reads 1 and
    an ideal pi pulse reads 0.
    """
    if not 0 < contrast <= 1:
        raise DomainError("contrast must lie in (0, 1]")
    c = contrast * misalignment_contrast_factor(theta)
    nv_minus = 1.0 - c * (populations.p_plus + populations.p_minus)
    raw = p_charge * nv_minus + (1.0 - p_charge)
    return (raw - (1.0 - c)) / c


def sample_fluorescence(signal: float, contrast: float, photons_per_shot: float, shots: int,
                        rng: np.random.Generator, theta: float = 0.0) -> float:
    """Shot-noise-limited estimate of a normalized signal (Poisson photon counts)."""
    c = contrast * misalignment_contrast_factor(theta)
    raw = 1.0 - c * (1.0 - signal)
    counts = rng.poisson(raw * photons_per_shot * shots)
    bright = photons_per_shot * shots
    return (counts / bright - (1.0 - c)) / c


def evolve_segment(state: DensityState, segment: ControlSegment, system: SpinSystem,
                   reset: ResetModel = ResetModel(), ideal_reset: bool = False) -> DensityState:
    if state.dim != system.dim:
        raise ConfigurationError(f"state dimension {state.dim} != system dimension {system.dim}")
    if segment.kind is SegmentKind.READOUT:
        return state
    if segment.kind is SegmentKind.LASER_RESET:
        return laser_reset(state, reset, ideal=ideal_reset)
    if segment.duration == 0 and segment.ideal_angle is None:
        return state
    u = segment_unitary(segment, system)
    return DensityState(u @ state.rho @ u.conj().T, state.n_nuclei)


def dump_state(state: DensityState, path: Union[str, Path]) -> None:
    """Write rho as little-endian complex128 (row-major) plus a JSON sidecar."""
    path = Path(path)
    np.ascontiguousarray(state.rho, dtype="<c16").tofile(path)
    sidecar = {"dim": state.dim, "n_nuclei": state.n_nuclei, "dtype": "complex128",
               "byte_order": "little", "order": "row-major", "basis_labels": state.basis_labels}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2))


def load_state(path: Union[str, Path]) -> DensityState:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    rho = np.fromfile(path, dtype="<c16").reshape(meta["dim"], meta["dim"])
    return DensityState(rho.astype(complex), meta["n_nuclei"])
