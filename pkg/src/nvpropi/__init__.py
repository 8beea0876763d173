"""Dynamic nuclear polarization of a 13C bath by a single NV center.

Dense density-matrix simulation of the NOVEL, ISE, DQT-NOVEL and DQT-ISE
polarization protocols with PROPI (polarization readout by polarization
inversion) quantification, plus a sweep runner and CLI.
"""

from .analysis import (
    PropiResult,
    analyze_trace,
    estimate_offset,
    extract_oscillation_frequency,
    initialization_correction,
    signal_area,
)
from .errors import ConfigurationError, DomainError, NvPropiError
from .evolution import (
    ChirpDiscretization,
    ControlSegment,
    DensityState,
    Frame,
    ResetModel,
    SegmentKind,
    dump_state,
    evolve_segment,
    fluorescence,
    laser_reset,
    load_state,
    measure_nv,
    propagator,
    segment_unitary,
)
from .hamiltonians import (
    DqtParams,
    SqtFrameParams,
    Transition,
    adiabaticity_factor,
    dqt_effective_hamiltonian,
    dqt_effective_parameters,
    dqt_effective_rabi,
    dqt_hartmann_hahn_drive,
    dqt_interaction_hamiltonian,
    lab_hamiltonian,
    nv_transition_frequencies,
    spin_operators,
    sqt_rotating_hamiltonian,
)
from .lattice_bath import (
    BathNucleus,
    PhysicalConstants,
    SpinSystem,
    bath_seed,
    hyperfine_from_position,
    lattice_sites,
    load_bath,
    sample_bath,
    save_bath,
)
from .protocols import (
    DqtCycleParams,
    Direction,
    IseParams,
    NovelParams,
    PropiPlan,
    PropiRecord,
    build_cycle,
    build_dqt_ise_cycle,
    build_dqt_novel_cycle,
    build_ise_cycle,
    build_novel_cycle,
    run_propi,
    single_cycle_transfer,
)
from .sweep import SweepConfig, run_sweep, validate_config

__version__ = "0.1.0"

__all__ = [
    "BathNucleus",
    "ChirpDiscretization",
    "ConfigurationError",
    "ControlSegment",
    "DensityState",
    "Direction",
    "DomainError",
    "DqtCycleParams",
    "DqtParams",
    "Frame",
    "IseParams",
    "NovelParams",
    "NvPropiError",
    "PhysicalConstants",
    "PropiPlan",
    "PropiRecord",
    "PropiResult",
    "ResetModel",
    "SegmentKind",
    "SpinSystem",
    "SqtFrameParams",
    "SweepConfig",
    "Transition",
    "adiabaticity_factor",
    "analyze_trace",
    "bath_seed",
    "build_cycle",
    "build_dqt_ise_cycle",
    "build_dqt_novel_cycle",
    "build_ise_cycle",
    "build_novel_cycle",
    "dqt_effective_hamiltonian",
    "dqt_effective_parameters",
    "dqt_effective_rabi",
    "dqt_hartmann_hahn_drive",
    "dqt_interaction_hamiltonian",
    "dump_state",
    "estimate_offset",
    "evolve_segment",
    "extract_oscillation_frequency",
    "fluorescence",
    "hyperfine_from_position",
    "initialization_correction",
    "lab_hamiltonian",
    "laser_reset",
    "lattice_sites",
    "load_bath",
    "load_state",
    "measure_nv",
    "nv_transition_frequencies",
    "propagator",
    "run_propi",
    "run_sweep",
    "sample_bath",
    "save_bath",
    "segment_unitary",
    "signal_area",
    "single_cycle_transfer",
    "spin_operators",
    "sqt_rotating_hamiltonian",
    "validate_config",
]
