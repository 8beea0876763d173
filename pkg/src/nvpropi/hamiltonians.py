"""Spin operators and NV/13C Hamiltonians as dense complex matrices.

The composite space is NV (x) nucleus_1 (x) ... (x) nucleus_n. The NV basis is
ordered (|+1>, |0>, |-1>); each nucleus uses (|up>, |down>). All Hamiltonians
are in rad/s with hbar = 1.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigurationError, DomainError
from .lattice_bath import DEFAULT_MAX_DIM, SpinSystem

TWO_PI = 2.0 * math.pi

# NV level -> basis index
NV_INDEX = {+1: 0, 0: 1, -1: 2}

_S = 1.0 / math.sqrt(2.0)
SX1 = np.array([[0, _S, 0], [_S, 0, _S], [0, _S, 0]], dtype=complex)
SY1 = np.array([[0, -1j * _S, 0], [1j * _S, 0, -1j * _S], [0, 1j * _S, 0]], dtype=complex)
SZ1 = np.diag([1.0, 0.0, -1.0]).astype(complex)
IX = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
IY = 0.5 * np.array([[0, -1j], [1j, 0]], dtype=complex)
IZ = 0.5 * np.array([[1, 0], [0, -1]], dtype=complex)


class Transition(enum.Enum):
    ZERO_TO_MINUS_ONE = "0-1"
    ZERO_TO_PLUS_ONE = "0+1"

    @property
    def driven_level(self) -> int:
        return -1 if self is Transition.ZERO_TO_MINUS_ONE else +1

    @property
    def pseudo_spin(self) -> tuple:
        """(up, down) NV levels of the two-level pseudo-spin.

        Chosen so that S_z restricted to the pair equals sigma_z plus a
        multiple of the identity.
        """
        if self is Transition.ZERO_TO_MINUS_ONE:
            return (0, -1)
        return (+1, 0)


@dataclass(frozen=True)
class SqtFrameParams:
    """Single-quantum rotating-frame parameters (all rad/s).

    ``B_eff`` defaults to the bare nuclear Larmor frequency when None.
    """

    Omega: float = 0.0
    Delta: float = 0.0
    B_eff: Optional[float] = None
    which_transition: Transition = Transition.ZERO_TO_MINUS_ONE

    def __post_init__(self):
        if self.Omega < 0:
            raise ConfigurationError("Omega must be non-negative")


@dataclass(frozen=True)
class DqtParams:
    """Two-tone double-quantum drive parameters (rad/s).

    The tone amplitudes entering the Hamiltonian are ``sqrt(alpha)`` times
    ``Omega_p1`` and ``Omega_m1``.
    """

    Omega_p1: float = 0.0
    Omega_m1: float = 0.0
    Delta: float = TWO_PI * 40e6
    delta: float = 0.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.Omega_p1 < 0 or self.Omega_m1 < 0:
            raise ConfigurationError("drive amplitudes must be non-negative")
        if self.alpha < 0:
            raise ConfigurationError("alpha must be non-negative")

    @property
    def amplitudes(self) -> tuple:
        s = math.sqrt(self.alpha)
        return s * self.Omega_p1, s * self.Omega_m1

    @property
    def is_valid_effective(self) -> bool:
        return self.Delta > max(self.amplitudes)


class SpinOperators(NamedTuple):
    Sx: np.ndarray
    Sy: np.ndarray
    Sz: np.ndarray
    Ix: tuple
    Iy: tuple
    Iz: tuple
    n_nuclei: int

    @property
    def dim(self) -> int:
        return 3 * 2**self.n_nuclei

    def projector(self, m: int, m_prime: int) -> np.ndarray:
        """|m><m'| on the NV, identity on the bath."""
        return nv_operator(nv_ket_bra(m, m_prime), self.n_nuclei)


def nv_ket_bra(m: int, m_prime: int) -> np.ndarray:
    op = np.zeros((3, 3), dtype=complex)
    op[NV_INDEX[m], NV_INDEX[m_prime]] = 1.0
    return op


def nv_operator(op3: np.ndarray, n_nuclei: int) -> np.ndarray:
    return np.kron(op3, np.eye(2**n_nuclei))


def _nuclear_operator(op2: np.ndarray, j: int, n_nuclei: int) -> np.ndarray:
    left = np.eye(3 * 2**j)
    right = np.eye(2 ** (n_nuclei - j - 1))
    return np.kron(np.kron(left, op2), right)


@functools.lru_cache(maxsize=16)
def spin_operators(n_nuclei: int, max_dim: int = DEFAULT_MAX_DIM) -> SpinOperators:
    """Spin-1 NV and spin-1/2 nuclear operators lifted to the full space.

    The returned arrays are read-only and shared between callers.
    """
    if n_nuclei < 0 or 3 * 2**n_nuclei > max_dim:
        raise ConfigurationError(f"{n_nuclei} nuclei exceed the dimension cap {max_dim}")
    sx, sy, sz = (nv_operator(op, n_nuclei) for op in (SX1, SY1, SZ1))
    ix = tuple(_nuclear_operator(IX, j, n_nuclei) for j in range(n_nuclei))
    iy = tuple(_nuclear_operator(IY, j, n_nuclei) for j in range(n_nuclei))
    iz = tuple(_nuclear_operator(IZ, j, n_nuclei) for j in range(n_nuclei))
    for arr in (sx, sy, sz, *ix, *iy, *iz):
        arr.flags.writeable = False
    return SpinOperators(sx, sy, sz, ix, iy, iz, n_nuclei)


def _hyperfine_field(system: SpinSystem, ops: SpinOperators) -> np.ndarray:
    """Sum_j (a_par_j I_jz + a_perp_j I_jx), an operator on the full space."""
    out = np.zeros((ops.dim, ops.dim), dtype=complex)
    for j, nuc in enumerate(system.nuclei):
        out += nuc.a_par * ops.Iz[j] + nuc.a_perp * ops.Ix[j]
    return out


def _total_iz(ops: SpinOperators) -> np.ndarray:
    out = np.zeros((ops.dim, ops.dim), dtype=complex)
    for iz in ops.Iz:
        out += iz
    return out


def nv_zero_field_hamiltonian(system: SpinSystem) -> np.ndarray:
    """3x3 NV-only part of the lab Hamiltonian: D Sz^2 + gamma_e B.S."""
    c = system.constants
    b = system.field_magnitude
    bx, bz = b * math.sin(system.theta), b * math.cos(system.theta)
    return c.D * SZ1 @ SZ1 + c.gamma_e * (bx * SX1 + bz * SZ1)


def lab_hamiltonian(system: SpinSystem) -> np.ndarray:
    ops = spin_operators(system.n_nuclei)
    h = nv_operator(nv_zero_field_hamiltonian(system), system.n_nuclei)
    h = h + system.larmor * _total_iz(ops)
    h = h + ops.Sz @ _hyperfine_field(system, ops)
    return h


class TransitionFrequencies(NamedTuple):
    f_sqt_minus: float
    f_sqt_plus: float
    f_dqt: float
    min_overlap: float
    ambiguous: bool


def nv_eigenbasis(system: SpinSystem):
    """Eigenvalues and eigenvectors of the NV Hamiltonian labeled by m_s.

    Returns ``(energies, vectors, overlaps)`` where ``energies[m]`` and
    ``vectors[m]`` are keyed by m_s in (+1, 0, -1), labeling each eigenstate
    by maximal overlap with |m_s>.
    """
    w, v = np.linalg.eigh(nv_zero_field_hamiltonian(system))
    weights = np.abs(v) ** 2  # weights[basis, eigen]
    energies, vectors, overlaps = {}, {}, {}
    taken = set()
    for m in (+1, 0, -1):
        row = weights[NV_INDEX[m]].copy()
        row[list(taken)] = -1.0
        k = int(np.argmax(row))
        taken.add(k)
        energies[m] = w[k]
        vectors[m] = v[:, k]
        overlaps[m] = weights[NV_INDEX[m], k]
    return energies, vectors, overlaps


def nv_transition_frequencies(system: SpinSystem) -> TransitionFrequencies:
    """SQT and DQT frequencies (Hz) of the NV, nuclei ignored.

    The result is flagged ``ambiguous`` when any eigenstate overlaps its
    m_s label by less than 0.6 (near level anti-crossings).
    """
    e, _, ov = nv_eigenbasis(system)
    min_ov = min(ov.values())
    return TransitionFrequencies(
        f_sqt_minus=abs(e[-1] - e[0]) / TWO_PI,
        f_sqt_plus=abs(e[+1] - e[0]) / TWO_PI,
        f_dqt=abs(e[+1] - e[-1]) / TWO_PI,
        min_overlap=float(min_ov),
        ambiguous=bool(min_ov < 0.6),
    )


def sz_expectations(system: SpinSystem) -> dict:
    """<e_m|S_z|e_m> for the NV eigenstates; exactly m_s when aligned."""
    if system.theta == 0.0:
        return {+1: 1.0, 0: 0.0, -1: -1.0}
    _, vecs, _ = nv_eigenbasis(system)
    return {m: float(np.real(np.vdot(vec, SZ1 @ vec))) for m, vec in vecs.items()}


def _two_level_ops(up: int, down: int, n_nuclei: int):
    """sigma_x, sigma_y, sigma_z (spin-1/2 normalization) on the (up, down) pair."""
    sx = 0.5 * (nv_ket_bra(up, down) + nv_ket_bra(down, up))
    sy = 0.5 * (-1j * nv_ket_bra(up, down) + 1j * nv_ket_bra(down, up))
    sz = 0.5 * (nv_ket_bra(up, up) - nv_ket_bra(down, down))
    return tuple(nv_operator(op, n_nuclei) for op in (sx, sy, sz))


def _drive(up: int, down: int, omega: float, phase: float, n_nuclei: int) -> np.ndarray:
    """omega*(sigma_x cos(phase) + sigma_y sin(phase)) on the (up, down) pair."""
    op = 0.5 * omega * (np.exp(-1j * phase) * nv_ket_bra(up, down))
    op = op + op.conj().T
    return nv_operator(op, n_nuclei)


def _projected_sz(system: SpinSystem) -> np.ndarray:
    """S_z projected on the NV eigenstates, diag(<e_m|S_z|e_m>), on the full space."""
    sz_exp = sz_expectations(system)
    return nv_operator(np.diag([sz_exp[+1], sz_exp[0], sz_exp[-1]]).astype(complex), system.n_nuclei)


def sqt_rotating_hamiltonian(system: SpinSystem, params: SqtFrameParams, phase: float = 0.0) -> np.ndarray:
    """Rotating-frame Hamiltonian of a single-quantum drive (RWA).

    Omega (sigma_x cos phase + sigma_y sin phase) + Delta sigma_z
    + B_eff sum_j I_jz + S_z sum_j (a_par_j I_jz + a_perp_j I_jx),
    with sigma the spin-1/2 operators of the driven pair and the third NV
    level undriven. On the driven pair S_z = sigma_z + (mean m_s), so each
    nucleus precesses about its own m_s-averaged field: this is the
    per-nucleus primed frame written without rotating the operators.
    For a misaligned field S_z is projected on the NV eigenstates.
    """
    n = system.n_nuclei
    ops = spin_operators(n)
    up, down = params.which_transition.pseudo_spin
    _, _, sz = _two_level_ops(up, down, n)
    b_eff = system.larmor if params.B_eff is None else params.B_eff
    h = _drive(up, down, params.Omega, phase, n) + params.Delta * sz
    h = h + b_eff * _total_iz(ops)
    h = h + _projected_sz(system) @ _hyperfine_field(system, ops)
    return h


def dqt_interaction_hamiltonian(system: SpinSystem, params: DqtParams, phase: float = 0.0) -> np.ndarray:
    """Three-level interaction-picture Hamiltonian of the two-tone DQ drive.

    (delta/2) S_z + Delta S_z^2 + tone couplings + gamma_I B sum I_z
    + S_z sum (a_par I_z + a_perp I_x). ``phase`` is applied to the
    |+1>-|0> tone, which sets the phase of the effective DQ drive.
    """
    n = system.n_nuclei
    ops = spin_operators(n)
    om_p, om_m = params.amplitudes
    sz_eff = _projected_sz(system)
    h = 0.5 * params.delta * ops.Sz + params.Delta * ops.Sz @ ops.Sz
    h = h + _drive(+1, 0, om_p, phase, n) + _drive(-1, 0, om_m, 0.0, n)
    h = h + system.larmor * _total_iz(ops)
    h = h + sz_eff @ _hyperfine_field(system, ops)
    return h


def dqt_effective_parameters(params: DqtParams) -> tuple:
    """(Omega_eff, delta_so) of the adiabatically eliminated DQ model (rad/s)."""
    if not params.is_valid_effective:
        raise DomainError(
            "effective DQ model requires Delta > max(Omega_+1, Omega_-1) "
            f"(Delta={params.Delta:.4g}, amplitudes={params.amplitudes})"
        )
    omega_sqt = math.sqrt(params.Omega_p1 * params.Omega_m1)
    omega_eff = dqt_effective_rabi(omega_sqt, params.Delta, params.alpha)
    delta_so = params.alpha * (params.Omega_p1**2 - params.Omega_m1**2) / (4.0 * params.Delta)
    return omega_eff, delta_so


def dqt_effective_hamiltonian(system: SpinSystem, params: DqtParams, phase: float = 0.0) -> np.ndarray:
    """Two-level DQ Hamiltonian on {|+1>, |-1>} (x) bath, embedded in the full space.

    (delta + delta_so) sigma_z + Omega_eff sigma_x + gamma_I B sum I_z
    + 2 sigma_z sum (a_par I_z + a_perp I_x); the |0> level is inert.
    """
    omega_eff, delta_so = dqt_effective_parameters(params)
    n = system.n_nuclei
    ops = spin_operators(n)
    _, _, sz = _two_level_ops(+1, -1, n)
    sz_exp = sz_expectations(system)
    scale = 0.5 * (sz_exp[+1] - sz_exp[-1])
    h = (params.delta + delta_so) * sz + _drive(+1, -1, omega_eff, phase, n)
    h = h + system.larmor * _total_iz(ops)
    h = h + 2.0 * scale * sz @ _hyperfine_field(system, ops)
    return h


def dqt_effective_rabi(Omega_sqt: float, Delta: float, alpha: float = 1.0) -> float:
    """Effective DQ Rabi frequency 1/2 (sqrt(2 alpha Omega^2 + Delta^2) - Delta)."""
    if Delta < 0 or alpha < 0:
        raise DomainError("Delta and alpha must be non-negative")
    return 0.5 * (math.sqrt(2.0 * alpha * Omega_sqt**2 + Delta**2) - Delta)


def dqt_hartmann_hahn_drive(larmor: float, Delta: float, alpha: float = 1.0) -> float:
    """Per-tone amplitude Omega_sqt for which the effective DQ Rabi equals ``larmor``."""
    return math.sqrt(2.0 * larmor * (larmor + Delta) / alpha)


def adiabaticity_factor(Omega: float, sweep_rate: float) -> float:
    """Omega^2/|v| with Omega in rad/s and v = df/dt in Hz/s."""
    if sweep_rate == 0:
        raise DomainError("sweep rate must be non-zero")
    return Omega**2 / abs(sweep_rate)


def is_hermitian(h: np.ndarray, rtol: float = 1e-12) -> bool:
    norm = np.linalg.norm(h)
    return bool(np.linalg.norm(h - h.conj().T) <= rtol * max(norm, 1e-300))
