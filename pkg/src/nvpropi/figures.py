"""Desk-scale experiment presets for the ``figure`` CLI verb.

Each preset is a plain experiment document (see :mod:`nvpropi.sweep`). Baths
are small (three lattice-sampled nuclei, five seeds) and the plans short, so
every preset finishes in minutes on one core. Grid ranges bracket the
analytically known features (Hartmann-Hahn match at gamma_C B, saturation of
the sweep range, LZS fringes) rather than digitized axis limits.
"""

from __future__ import annotations

import copy

_BATH = {"field_T": 0.175, "radius_nm": 1.5, "min_coupling_hz": 10e3, "max_spins": 3}
_PLAN = {"n_polarize": 30, "m_readout": 60, "tail_points": 20, "repetitions": 2}
_SEEDS = [0, 1, 2, 3, 4]

FIGURES = {
    # polarization build-up versus number of polarizing cycles
    "fig2e": {
        "protocol": "Novel", "parameter": "NPolarize",
        "grid": [0, 2, 5, 10, 20, 40, 80],
        "plan": {**_PLAN, "m_readout": 100},
    },
    # NOVEL Rabi sweep through the Hartmann-Hahn match
    "fig3a": {
        "protocol": "Novel", "parameter": "Rabi",
        "grid": {"min": 1.0e6, "max": 2.8e6, "points": 91},
    },
    # NOVEL spin-lock duration sweep
    "fig3b": {
        "protocol": "Novel", "parameter": "LockDuration",
        "grid": {"min": 0.0, "max": 20e-6, "points": 41},
    },
    # ISE sweep range at fixed sweep rate
    "fig4b": {
        "protocol": "Ise", "parameter": "SweepRange",
        "grid": {"min": 0.5e6, "max": 20e6, "points": 40},
        "cycle": {"rabi_hz": 1.0e6, "sweep_rate_hz_per_s": 10e6 / 80e-6},
    },
    # ISE sweep rate (LZS fringes)
    "fig4c": {
        "protocol": "Ise", "parameter": "SweepRate",
        "grid": {"min": 10e6 / 100e-6, "max": 10e6 / 10e-6, "points": 31, "spacing": "log"},
        "cycle": {"rabi_hz": 1.7e6, "f_range_hz": 10e6},
    },
    # ISE drive amplitude
    "fig4d": {
        "protocol": "Ise", "parameter": "Rabi",
        "grid": {"min": 1.0e6, "max": 2.6e6, "points": 33},
        "cycle": {"f_range_hz": 10e6, "duration_s": 40e-6},
    },
    # DQT-NOVEL: amplitude factor alpha through the DQ Hartmann-Hahn match
    "fig5b": {
        "protocol": "DqtNovel", "parameter": "Amplitude",
        "grid": {"min": 0.6, "max": 1.6, "points": 51},
        "cycle": {"rabi_hz": 12.527e6, "effective": True},
    },
    # DQT-NOVEL lock duration (doubled flip-flop frequency)
    "fig5c": {
        "protocol": "DqtNovel", "parameter": "LockDuration",
        "grid": {"min": 0.0, "max": 20e-6, "points": 41},
        "cycle": {"effective": True},
    },
    # DQT-ISE sweep range
    "fig6b": {
        "protocol": "DqtIse", "parameter": "SweepRange",
        "grid": {"min": 0.5e6, "max": 20e6, "points": 40},
        "cycle": {"rabi_hz": 9.055e6, "sweep_rate_hz_per_s": 10e6 / 80e-6, "effective": True},
    },
    # DQT-ISE sweep rate
    "fig6c": {
        "protocol": "DqtIse", "parameter": "SweepRate",
        "grid": {"min": 10e6 / 100e-6, "max": 10e6 / 10e-6, "points": 31, "spacing": "log"},
        "cycle": {"rabi_hz": 12.0e6, "f_range_hz": 10e6, "effective": True},
    },
    # DQT-ISE amplitude factor
    "fig6d": {
        "protocol": "DqtIse", "parameter": "Amplitude",
        "grid": {"min": 0.2, "max": 1.6, "points": 29},
        "cycle": {"rabi_hz": 12.527e6, "f_range_hz": 10e6, "duration_s": 40e-6, "effective": True},
    },
}


def figure_config(name: str) -> dict:
    """Experiment document of a preset, with bath, plan and seeds filled in."""
    if name not in FIGURES:
        raise KeyError(f"unknown figure preset {name!r}; choose from {sorted(FIGURES)}")
    doc = copy.deepcopy(FIGURES[name])
    doc.setdefault("plan", dict(_PLAN))
    doc["system"] = {**_BATH, **doc.get("system", {})}
    doc.setdefault("seeds", list(_SEEDS))
    doc["name"] = name
    doc["output_path"] = f"{name}.csv"
    return doc
