import json
import math
import subprocess
import sys

import numpy as np
import pytest

from nvpropi import cli, sweep
from nvpropi.errors import DomainError
from nvpropi.figures import FIGURES, figure_config
from nvpropi.sweep import (
    CSV_COLUMNS,
    ConfigErrors,
    SweepConfig,
    aggregate,
    build_point,
    normalize_config,
    run_sweep,
    validate_config,
    write_csv,
)

NUCLEI = [{"a_par_hz": -30e3, "a_perp_hz": 80e3}, {"a_par_hz": 20e3, "a_perp_hz": 60e3}]


def small_doc(**kw):
    doc = {
        "protocol": "Novel",
        "parameter": "Rabi",
        "grid": [1.6e6, 1.87e6, 2.2e6],
        "plan": {"n_polarize": 5, "m_readout": 20, "tail_points": 5},
        "system": {"nuclei": NUCLEI},
        "seeds": [0, 1],
    }
    doc.update(kw)
    return doc


def write_json(tmp_path, doc, name="exp.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def errors_of(doc):
    with pytest.raises(ConfigErrors) as info:
        normalize_config(doc)
    return info.value.errors


def test_missing_required_field_is_reported_with_pointer():
    doc = small_doc()
    del doc["grid"]
    assert "/grid: required field missing" in errors_of(doc)
    doc = small_doc(grid={"min": 0, "max": 1})
    assert any(e.startswith("/grid") for e in errors_of(doc))


def test_schema_type_errors_carry_pointer():
    errs = errors_of(small_doc(plan={"n_polarize": "five"}))
    assert any(e.startswith("/plan/n_polarize:") for e in errs)
    assert any(e.startswith("/bogus") or "bogus" in e for e in errors_of(small_doc(bogus=1)))


def test_semantic_errors():
    assert any("monotonic" in e for e in errors_of(small_doc(grid=[1e6, 3e6, 2e6])))
    assert any("ISE protocols only" in e for e in errors_of(small_doc(parameter="SweepRange")))
    assert any(e.startswith("/plan/tail_points") for e in
               errors_of(small_doc(plan={"m_readout": 10, "tail_points": 10})))
    assert any("Hilbert" in e for e in errors_of(small_doc(system={"nuclei": NUCLEI * 6})))


def test_dqt_drive_must_stay_below_delta():
    doc = small_doc(protocol="DqtNovel", grid=[10e6, 50e6])
    errs = errors_of(doc)
    assert any(e.startswith("/cycle/Delta_hz") and "adiabatic elimination" in e for e in errs)


def test_validate_echoes_derived_quantities(tmp_path):
    doc = small_doc(protocol="Ise", parameter="SweepRange", grid=[5e6, 10e6],
                    cycle={"rabi_hz": 1.87e6, "duration_s": 10e-6})
    echo = validate_config(write_json(tmp_path, doc))
    d = echo["derived"]
    assert [x["sweep_rate_hz_per_s"] for x in d] == pytest.approx([5e11, 1e12])
    # Omega^2 / v with Omega in rad/s and v in Hz/s
    assert d[1]["adiabaticity_factor"] == pytest.approx(138, rel=0.01)
    assert echo["config"]["plan"]["repetitions"] == 2


def test_validate_dqt_reports_effective_rabi(tmp_path):
    doc = small_doc(protocol="DqtNovel", parameter="Amplitude", grid=[1.0], cycle={"rabi_hz": 10e6})
    d = validate_config(write_json(tmp_path, doc))["derived"][0]
    assert d["omega_eff_hz"] == pytest.approx(1.2132e6, rel=1e-4)


def test_default_drive_is_hartmann_hahn():
    cfg = normalize_config(small_doc(protocol="DqtNovel", parameter="LockDuration", grid=[1e-6]))
    system, plan = build_point(cfg, 1e-6, 0)
    assert plan.polarize_cycle.omega_eff == pytest.approx(system.larmor, rel=1e-9)


def test_aggregate_standard_error():
    mean, err = aggregate([1.0, 2.0, 3.0, 4.0])
    assert mean == 2.5
    assert err == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert aggregate([5.0]) == (5.0, 0.0)
    rng = np.random.default_rng(0)
    small = aggregate(rng.normal(size=100))[1]
    large = aggregate(rng.normal(size=10000))[1]
    assert small / large == pytest.approx(10, rel=0.2)


@pytest.fixture(scope="module")
def small_result():
    return run_sweep(SweepConfig.from_dict(small_doc()))


def test_sweep_rows_and_hh_peak(small_result):
    rows = small_result.rows
    assert [r.sweep_value for r in rows] == [1.6e6, 1.87e6, 2.2e6]
    quanta = [r.mean_quanta for r in rows]
    assert int(np.argmax(quanta)) == 1
    assert small_result.failures == []


def test_csv_is_bit_identical_across_reruns_and_workers(small_result, tmp_path):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    write_csv(small_result, a)
    write_csv(run_sweep(SweepConfig.from_dict(small_doc())), b)
    write_csv(run_sweep(SweepConfig.from_dict(small_doc()), threads=2), c)
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    assert a.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


def test_unpolarized_baseline_is_near_zero():
    doc = small_doc(parameter="NPolarize", grid=[0, 10], cycle={"rabi_hz": 1.8739e6},
                    plan={"m_readout": 40, "tail_points": 10})
    rows = run_sweep(SweepConfig.from_dict(doc)).rows
    assert abs(rows[0].mean_quanta) < 0.05 * abs(rows[1].mean_quanta)


def test_cli_run_writes_csv_and_manifest(tmp_path, capsys):
    out = tmp_path / "out" / "sweep.csv"
    cfg = write_json(tmp_path, small_doc(grid=[1.87e6]))
    assert cli.main(["run", str(cfg), "--output", str(out), "--seed-override", "3",
                     "--dump-states", str(tmp_path / "states")]) == cli.EXIT_OK
    assert out.exists()
    manifest = json.loads((tmp_path / "out" / "sweep.manifest.json").read_text())
    assert manifest["config"]["seeds"] == [3]
    assert {"code_version", "python", "numpy", "wall_time_s", "derived"} <= set(manifest)
    dump = tmp_path / "states" / "point0000_seed3.c16"
    assert dump.stat().st_size == (3 * 4) ** 2 * 16


def test_cli_validate(tmp_path, capsys):
    assert cli.main(["validate", str(write_json(tmp_path, small_doc()))]) == cli.EXIT_OK
    assert "derived" in json.loads(capsys.readouterr().out)
    bad = small_doc()
    del bad["protocol"]
    assert cli.main(["validate", str(write_json(tmp_path, bad))]) == cli.EXIT_CONFIG
    assert "/protocol: required field missing" in capsys.readouterr().err
    assert cli.main(["validate", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG


def test_cli_run_config_error(tmp_path):
    bad = small_doc(grid=[3.0, 1.0, 2.0])
    assert cli.main(["run", str(write_json(tmp_path, bad))]) == cli.EXIT_CONFIG


def test_cli_physics_failure_exit_code(tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise DomainError("integrator blew up")

    monkeypatch.setattr(sweep, "run_propi", boom)
    cfg = write_json(tmp_path, small_doc(output_path=str(tmp_path / "x.csv")))
    assert cli.main(["run", str(cfg)]) == cli.EXIT_PHYSICS
    assert "integrator blew up" in capsys.readouterr().err


def test_partial_failure_is_flagged(monkeypatch):
    real = sweep.run_propi

    def flaky(system, plan, *args, **kwargs):
        if kwargs.get("seed") == [1, 0]:
            raise DomainError("bad seed")
        return real(system, plan, *args, **kwargs)

    monkeypatch.setattr(sweep, "run_propi", flaky)
    result = run_sweep(SweepConfig.from_dict(small_doc(grid=[1.87e6])))
    assert result.rows[0].flags == ["failed:1"]
    assert math.isfinite(result.rows[0].mean_quanta)
    assert result.failures[0]["seed"] == 1


@pytest.mark.parametrize("name", sorted(FIGURES))
def test_figure_presets_are_valid(name):
    cfg = normalize_config(figure_config(name))
    assert cfg["output_path"] == f"{name}.csv"
    sweep.derived_quantities(cfg)


def test_figure_print_config(capsys):
    assert cli.main(["figure", "fig3a", "--print-config"]) == cli.EXIT_OK
    assert json.loads(capsys.readouterr().out)["parameter"] == "Rabi"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nvpropi.cli", "validate", str(tmp_path / "nope.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "config error" in proc.stderr
