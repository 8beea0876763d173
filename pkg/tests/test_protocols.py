import csv
import math

import numpy as np
import pytest

from nvpropi.errors import ConfigurationError, DomainError
from nvpropi.evolution import DensityState, ResetModel, SegmentKind
from nvpropi.hamiltonians import Transition, dqt_hartmann_hahn_drive
from nvpropi.lattice_bath import BathNucleus, SpinSystem
from nvpropi.protocols import (
    DqtCycleParams,
    Direction,
    IseParams,
    NovelParams,
    PropiPlan,
    bath_polarization,
    build_cycle,
    run_propi,
    single_cycle_transfer,
    with_direction,
)

TWO_PI = 2 * math.pi


@pytest.fixture(scope="module")
def system():
    return SpinSystem(nuclei=(BathNucleus(a_par=TWO_PI * -20e3, a_perp=TWO_PI * 60e3),
                              BathNucleus(a_par=TWO_PI * 15e3, a_perp=TWO_PI * 40e3)))


def kinds(seq):
    return [s.kind for s in seq.segments]


def test_novel_sequence_structure(system):
    seq = build_cycle(NovelParams(rabi=system.larmor), system)
    assert kinds(seq) == [SegmentKind.LASER_RESET, SegmentKind.CONSTANT_DRIVE, SegmentKind.CONSTANT_DRIVE,
                          SegmentKind.CONSTANT_DRIVE, SegmentKind.READOUT]
    assert seq.segments[2].phase == pytest.approx(math.pi / 2)
    assert seq.segments[1].phase == seq.segments[3].phase
    assert seq.n_readouts == 1 and seq.warnings == ()


def test_novel_mismatch_warning(system):
    assert build_cycle(NovelParams(rabi=3 * system.larmor), system).warnings


def test_ise_sequence_sweeps_symmetric_range(system):
    p = IseParams(f_range=10e6, duration=40e-6, rabi=TWO_PI * 1.7e6)
    (start, end) = build_cycle(p, system).segments[1].sweep
    assert abs(end - start) == pytest.approx(TWO_PI * 10e6)
    assert start + end == pytest.approx(0.0)
    (s2, e2) = build_cycle(with_direction(p, Direction.DOWN), system).segments[1].sweep
    assert (s2, e2) == (pytest.approx(end), pytest.approx(start))


def test_ise_low_adiabaticity_warning(system):
    p = IseParams(f_range=10e6, duration=10e-9, rabi=TWO_PI * 0.5e6)
    assert any("adiabaticity" in w for w in build_cycle(p, system).warnings)


def test_dqt_sequences_are_framed_by_pi_pulses(system):
    drive = dqt_hartmann_hahn_drive(system.larmor, TWO_PI * 40e6)
    novel = build_cycle(DqtCycleParams(NovelParams(rabi=drive)), system)
    assert [s.label for s in novel.segments] == ["laser", "pi(0,-1)", "DQ pi/2", "DQ lock", "DQ pi/2",
                                                 "pi(0,-1)", "readout"]
    ise = build_cycle(DqtCycleParams(IseParams(5e6, 40e-6, drive)), system)
    (start, end) = ise.segments[2].sweep
    # two tones swept in opposite senses: delta covers +-f_range
    assert abs(end - start) == pytest.approx(2 * TWO_PI * 5e6)


def test_dqt_validity(system):
    strong = TWO_PI * 50e6
    with pytest.raises(DomainError):
        build_cycle(DqtCycleParams(NovelParams(rabi=strong), effective=True), system)
    seq = build_cycle(DqtCycleParams(NovelParams(rabi=strong)), system)
    assert any("Delta > Omega" in w for w in seq.warnings)


def test_wrong_base_type(system):
    from nvpropi.protocols import build_dqt_ise_cycle
    with pytest.raises(ConfigurationError):
        build_dqt_ise_cycle(DqtCycleParams(NovelParams(rabi=1.0)), system)


def test_parameter_validation():
    with pytest.raises(ConfigurationError):
        NovelParams(rabi=1.0, lock_duration=-1.0)
    with pytest.raises(ConfigurationError):
        IseParams(f_range=1e6, duration=0.0, rabi=1.0)
    with pytest.raises(ConfigurationError):
        PropiPlan(1, 10, NovelParams(rabi=1.0), tail_points=10)
    with pytest.raises(ConfigurationError):
        PropiPlan(-1, 10, NovelParams(rabi=1.0))
    with pytest.raises(ConfigurationError):
        PropiPlan(1, 10, NovelParams(rabi=1.0), tail_points=3, repetitions=0)


@pytest.mark.parametrize("transition", list(Transition))
def test_novel_directions_transfer_opposite_polarization(system, transition):
    up = NovelParams(rabi=system.larmor, lock_duration=6e-6, transition=transition, ideal_pulses=True)
    _, d_up = single_cycle_transfer(system, up)
    _, d_down = single_cycle_transfer(system, with_direction(up, Direction.DOWN))
    assert abs(d_up) > 1e-3
    assert d_down == pytest.approx(-d_up, rel=1e-9)


def test_signal_and_transfer_are_consistent(system):
    # on a maximally mixed bath each quantum gained by the bath leaves the NV bright;
    # counter-rotating hyperfine terms make the bookkeeping approximate
    p = NovelParams(rabi=system.larmor, lock_duration=6e-6, ideal_pulses=True)
    signal, d = single_cycle_transfer(system, p)
    assert signal == pytest.approx(abs(d), rel=1e-2)


def test_zero_lock_gives_no_transfer(system):
    p = NovelParams(rabi=system.larmor, lock_duration=0.0, ideal_pulses=True)
    signal, d = single_cycle_transfer(system, p)
    assert signal == pytest.approx(0.0, abs=1e-12)
    assert d == pytest.approx(0.0, abs=1e-12)


def test_far_off_resonant_ise_window_transfers_nothing(system):
    p = IseParams(f_range=2e6, duration=20e-6, rabi=TWO_PI * 1e6, center_offset=40e6)
    _, d = single_cycle_transfer(system, p)
    assert abs(d) < 1e-3


def test_dqt_effective_transfers_polarization(system):
    drive = dqt_hartmann_hahn_drive(system.larmor, TWO_PI * 40e6)
    p = DqtCycleParams(NovelParams(rabi=drive, lock_duration=3e-6, ideal_pulses=True), effective=True)
    _, d_up = single_cycle_transfer(system, p)
    _, d_down = single_cycle_transfer(system, with_direction(p, Direction.DOWN))
    assert abs(d_up) > 1e-3
    assert d_down == pytest.approx(-d_up, rel=1e-9)


def test_bath_polarization_of_product_state():
    per, total = bath_polarization(DensityState.polarized([1.0, -0.5, 0.2]))
    np.testing.assert_allclose(per, [0.5, -0.25, 0.1])
    assert total == pytest.approx(0.35)


def small_plan(system, **kw):
    base = dict(n_polarize=10, m_readout=30, polarize_cycle=NovelParams(rabi=system.larmor),
                tail_points=10)
    base.update(kw)
    return PropiPlan(**base)


def test_run_propi_is_deterministic_and_records_phases(system):
    plan = small_plan(system)
    a = run_propi(system, plan, jitter=0.05, seed=4)
    b = run_propi(system, plan, jitter=0.05, seed=4)
    assert np.array_equal(a.fluorescence, b.fluorescence)
    assert a.phase.count("N") == 10 and a.phase.count("M") == 30
    assert a.bath_iz.shape == (40, 2)
    c = run_propi(system, plan, jitter=0.05, seed=5)
    assert not np.array_equal(a.fluorescence, c.fluorescence)


def test_polarization_build_up_and_readout_decay(system):
    rec = run_propi(system, small_plan(system), ideal=True)
    totals = rec.bath_total
    # UP polarizing cycles drive the bath one way, the inverted readout cycles
    # pump it to the opposite sign while their signal decays to the offset
    assert rec.bath_total_before_readout > 0.1
    assert totals[-1] < -0.1
    assert rec.m_trace[0] > rec.m_trace[-1]
    assert np.all(np.diff(totals[:10]) > 0)


def test_fluorescence_stays_in_unit_interval(system):
    rec = run_propi(system, small_plan(system), reset=ResetModel())
    assert np.all(rec.fluorescence >= -1e-12) and np.all(rec.fluorescence <= 1 + 1e-12)


def test_record_csv(system, tmp_path):
    rec = run_propi(system, small_plan(system, n_polarize=2, m_readout=5, tail_points=2))
    path = tmp_path / "trace.csv"
    rec.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["cycle_index", "phase", "fluorescence", "p0", "bath_total_Iz", "Iz_0", "Iz_1"]
    assert len(rows) == 8
    assert float(rows[1][2]) == rec.fluorescence[0]


def test_state_callback_sees_every_cycle(system):
    seen = []
    run_propi(system, small_plan(system, n_polarize=2, m_readout=3, tail_points=1),
              state_callback=lambda k, ph, st: seen.append((k, ph)))
    assert seen == [(0, "N"), (1, "N"), (2, "M"), (3, "M"), (4, "M")]


def test_initial_state_dimension_is_checked(system):
    with pytest.raises(ConfigurationError):
        run_propi(system, small_plan(system), initial_bath=DensityState.maximally_mixed(1))
