"""Diamond-lattice 13C bath sampling and point-dipole hyperfine couplings.

Positions are expressed in the NV frame: the z axis points along the NV
symmetry axis ([111] of the cubic cell), the vacancy sits at the origin.
All couplings are angular frequencies (rad/s); JSON documents store Hz.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import constants as sc

from .errors import ConfigurationError, DomainError

TWO_PI = 2.0 * math.pi

MIN_DISTANCE = 0.15e-9
MAX_RADIUS = 5e-9
MAX_SPINS = 12
DEFAULT_MAX_DIM = 3 * 2**10

# lab cubic frame -> NV frame (rows are the NV-frame unit vectors)
_NV_FRAME = np.array(
    [
        [1.0, 1.0, -2.0],
        [-1.0, 1.0, 0.0],
        [1.0, 1.0, 1.0],
    ]
)
_NV_FRAME /= np.linalg.norm(_NV_FRAME, axis=1)[:, None]

_DIAMOND_BASIS = np.array(
    [
        [0.0, 0.0, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
        [0.5, 0.5, 0.0],
        [0.25, 0.25, 0.25],
        [0.25, 0.75, 0.75],
        [0.75, 0.25, 0.75],
        [0.75, 0.75, 0.25],
    ]
)


@dataclass(frozen=True)
class PhysicalConstants:
    """Physical constants used throughout the simulation (SI units).

    ``D`` is an angular frequency; ``gammaC`` is in rad s^-1 T^-1.
    """

    D: float = TWO_PI * 2.870e9
    g: float = 2.003
    muB: float = sc.physical_constants["Bohr magneton"][0]
    gammaC: float = 6.728e7
    a0: float = 0.3567e-9
    abundance: float = 0.011

    def __post_init__(self):
        for name in ("D", "g", "muB", "gammaC", "a0"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be strictly positive")
        if not 0.0 <= self.abundance <= 1.0:
            raise ConfigurationError("abundance must lie in [0, 1]")

    @property
    def gamma_e(self) -> float:
        """Electron gyromagnetic ratio g*muB/hbar in rad s^-1 T^-1."""
        return self.g * self.muB / sc.hbar

    @property
    def dipolar_prefactor(self) -> float:
        """(mu0/4pi) g muB gammaC, so that b(r) = prefactor / r**3 in rad/s."""
        return sc.mu_0 / (4.0 * math.pi) * self.g * self.muB * self.gammaC


@dataclass(frozen=True)
class BathNucleus:
    """A single 13C nucleus.

    Attributes:
        position: NV-frame position in meters, or None when the bath is
            specified by couplings alone.
        a_par: secular hyperfine coupling (rad/s).
        a_perp: pseudo-secular hyperfine coupling (rad/s).
    """

    position: Optional[tuple] = None
    a_par: float = 0.0
    a_perp: float = 0.0

    def __post_init__(self):
        if self.position is not None:
            pos = tuple(float(x) for x in self.position)
            if len(pos) != 3:
                raise ConfigurationError("position must be a 3-vector")
            object.__setattr__(self, "position", pos)
            if math.dist(pos, (0.0, 0.0, 0.0)) <= MIN_DISTANCE:
                raise DomainError("nucleus closer than 0.15 nm to the NV site")

    @classmethod
    def from_position(cls, position, constants: PhysicalConstants = PhysicalConstants()):
        a_par, a_perp = hyperfine_from_position(position, constants)
        return cls(position=tuple(position), a_par=a_par, a_perp=a_perp)

    @property
    def coupling(self) -> float:
        return math.hypot(self.a_par, self.a_perp)


@dataclass(frozen=True)
class SpinSystem:
    """NV electron spin plus an ordered bath of 13C nuclei.

    ``field_magnitude`` is in tesla, ``theta`` is the angle between the
    static field and the NV axis in radians.
    """

    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    field_magnitude: float = 0.175
    theta: float = 0.0
    nuclei: tuple = ()
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        object.__setattr__(self, "nuclei", tuple(self.nuclei))
        if not 0.0 <= self.theta <= math.pi / 2 + 1e-12:
            raise ConfigurationError("theta must lie in [0, pi/2]")
        if self.field_magnitude < 0:
            raise ConfigurationError("field_magnitude must be non-negative")
        if self.dim > self.max_dim:
            raise ConfigurationError(
                f"Hilbert dimension {self.dim} exceeds cap {self.max_dim}"
            )

    @property
    def n_nuclei(self) -> int:
        return len(self.nuclei)

    @property
    def dim(self) -> int:
        return 3 * 2 ** len(self.nuclei)

    @property
    def larmor(self) -> float:
        """Bare 13C Larmor frequency gammaC*|B| (rad/s)."""
        return self.constants.gammaC * self.field_magnitude

    def with_nuclei(self, nuclei: Iterable[BathNucleus]) -> "SpinSystem":
        return SpinSystem(self.constants, self.field_magnitude, self.theta, tuple(nuclei), self.max_dim)


def hyperfine_from_position(position, constants: PhysicalConstants = PhysicalConstants()):
    """Point-dipole hyperfine couplings of a nucleus at ``position`` (meters).

    Returns ``(a_par, a_perp)`` in rad/s with the NV axis as quantization axis:
    ``a_par = b (1 - 3 cos^2)`` and ``a_perp = 3 b sin cos`` where
    ``b = (mu0/4pi) g muB gammaC / r^3``.
    """
    x, y, z = (float(c) for c in position)
    r = math.sqrt(x * x + y * y + z * z)
    if r <= MIN_DISTANCE:
        raise DomainError(f"position |r| = {r:.3e} m is within 0.15 nm of the NV")
    b = constants.dipolar_prefactor / r**3
    cos_t = z / r
    sin_t = math.hypot(x, y) / r
    return b * (1.0 - 3.0 * cos_t * cos_t), 3.0 * b * sin_t * cos_t


def lattice_sites(radius: float, constants: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    """Carbon sites within ``radius`` of the vacancy, in the NV frame (meters).

    The vacancy (origin) and the nitrogen site at a0*(1/4, 1/4, 1/4) are
    excluded. Rows are sorted lexicographically in cubic coordinates so the
    ordering is platform independent.
    """
    if radius > MAX_RADIUS:
        raise ConfigurationError(f"radius {radius:.3e} m exceeds cap of 5 nm")
    a0 = constants.a0
    n = int(math.ceil(radius / a0)) + 1
    cells = np.arange(-n, n + 1)
    grid = np.stack(np.meshgrid(cells, cells, cells, indexing="ij"), axis=-1).reshape(-1, 1, 3)
    frac = (grid + _DIAMOND_BASIS[None, :, :]).reshape(-1, 3)
    # drop the vacancy and nitrogen sites
    keep = ~(np.all(frac == 0.0, axis=1) | np.all(frac == 0.25, axis=1))
    frac = frac[keep]
    cubic = frac * a0
    inside = np.einsum("ij,ij->i", cubic, cubic) <= radius * radius
    frac = frac[inside]
    order = np.lexsort((frac[:, 2], frac[:, 1], frac[:, 0]))
    return (frac[order] * a0) @ _NV_FRAME.T


def mark_c13_sites(seed, radius: float, constants: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    """Positions of the lattice sites occupied by 13C for this seed."""
    sites = lattice_sites(radius, constants)
    rng = np.random.default_rng(seed)
    occupied = rng.random(len(sites)) < constants.abundance
    return sites[occupied]


def sample_bath(
    seed,
    radius: float = 1.5e-9,
    min_coupling: float = TWO_PI * 2e3,
    max_spins: int = 8,
    constants: PhysicalConstants = PhysicalConstants(),
) -> list:
    """Randomly populate the diamond lattice with 13C and keep the strongest nuclei.

    Args:
        seed: integer seed (or sequence of ints, see :func:`bath_seed`).
        radius: sampling sphere radius in meters (at most 5 nm).
        min_coupling: discard nuclei with sqrt(a_par^2 + a_perp^2) below
            this angular frequency.
        max_spins: keep at most this many of the strongest-coupled nuclei.

    Returns:
        List of :class:`BathNucleus` sorted by descending coupling magnitude.
    """
    if max_spins > MAX_SPINS or max_spins < 0:
        raise ConfigurationError(f"max_spins must be in [0, {MAX_SPINS}]")
    nuclei = []
    for pos in mark_c13_sites(seed, radius, constants):
        if np.linalg.norm(pos) <= MIN_DISTANCE:
            continue
        nuc = BathNucleus.from_position(tuple(pos), constants)
        if nuc.coupling >= min_coupling:
            nuclei.append(nuc)
    nuclei.sort(key=_sort_key)
    return nuclei[:max_spins]


def bath_seed(master_seed: int, bath_index: int) -> list:
    """Seed material for the ``bath_index``-th bath of an experiment."""
    return [int(master_seed), int(bath_index)]


def _sort_key(nuc: BathNucleus):
    pos = nuc.position if nuc.position is not None else (0.0, 0.0, 0.0)
    return (-nuc.coupling, pos)


def bath_to_dict(nuclei: Sequence[BathNucleus], seed=None, radius: Optional[float] = None) -> dict:
    doc = {
        "seed": seed,
        "radius_nm": None if radius is None else radius * 1e9,
        "nuclei": [],
    }
    for nuc in nuclei:
        entry = {"a_par_hz": nuc.a_par / TWO_PI, "a_perp_hz": nuc.a_perp / TWO_PI}
        if nuc.position is not None:
            entry["pos_nm"] = [c * 1e9 for c in nuc.position]
        doc["nuclei"].append(entry)
    return doc


def bath_from_dict(doc: dict) -> list:
    nuclei = []
    for entry in doc.get("nuclei", []):
        pos = entry.get("pos_nm")
        nuclei.append(
            BathNucleus(
                position=None if pos is None else tuple(c * 1e-9 for c in pos),
                a_par=TWO_PI * float(entry["a_par_hz"]),
                a_perp=TWO_PI * float(entry["a_perp_hz"]),
            )
        )
    return nuclei


def save_bath(path: Union[str, Path], nuclei, seed=None, radius=None) -> None:
    Path(path).write_text(json.dumps(bath_to_dict(nuclei, seed, radius), indent=2))


def load_bath(path: Union[str, Path]) -> list:
    return bath_from_dict(json.loads(Path(path).read_text()))
