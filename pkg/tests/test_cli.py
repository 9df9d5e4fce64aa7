import json
import math

import pytest

from cavityghz import cli, model
from cavityghz.errors import ValidationError


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# --- quantity parsing and config resolution --------------------------------

def test_parse_quantity_forms():
    assert cli.parse_quantity("0.2") == (0.2, False)
    assert cli.parse_quantity(0.2) == (0.2, False)
    value, physical = cli.parse_quantity("2pi*3.5 MHz")
    assert physical and value == pytest.approx(2 * math.pi * 3.5e6)
    value, physical = cli.parse_quantity("1.52e5 Hz")
    assert physical and value == pytest.approx(1.52e5)
    with pytest.raises(ValidationError):
        cli.parse_quantity("fast")


def test_empty_config_defaults():
    config = cli.parse_config()
    p = config.params
    assert config.schedule == "tqd" and not config.open_system
    assert p.n_atoms == 3 and p.omega0 == 0.2 and p.delta == 2.3
    assert p.g == p.v == 1.0
    assert p.t0 == pytest.approx(0.14 * p.t_f)
    assert p.tc == pytest.approx(0.19 * p.t_f)
    assert p.alpha == pytest.approx(math.pi / 4)


def test_experimental_preset_conversion():
    config = cli.parse_config(flags={"preset": "experimental"})
    p = config.params
    assert p.g == 1.0
    assert p.gamma == pytest.approx(2.62 / 750.0)
    assert p.kappa_c == pytest.approx(3.5 / 750.0)
    assert p.kappa_f == pytest.approx(1.52e5 / (2 * math.pi * 750e6))
    assert p.gamma == pytest.approx(model.EXPERIMENTAL_RATES["gamma"])


def test_physical_units_require_physical_g():
    with pytest.raises(ValidationError, match="g is not physical"):
        cli.parse_config(flags={"gamma": "2pi*2.62 MHz"})


def test_unknown_keys_rejected_together():
    with pytest.raises(ValidationError) as err:
        cli.parse_config(file_data={"omega_zero": 0.2, "decay": 0.1})
    assert len(err.value.problems) == 2


def test_flags_override_file():
    config = cli.parse_config(
        file_data={"omega0": 0.1, "schedule": "adiabatic", "tf": 400},
        flags={"omega0": "0.25"},
    )
    assert config.params.omega0 == 0.25
    assert config.schedule == "adiabatic"
    assert config.params.t_f == 400.0


def test_config_round_trip():
    original = cli.parse_config(
        flags={"preset": "experimental", "tf": 72, "schedule": "tqd",
               "observables": "fidelity,leakage", "threads": 2}
    )
    again = cli.parse_config(file_data=original.to_dict())
    assert again == original


def test_unknown_observable_listed():
    with pytest.raises(ValidationError, match="pop:phi2"):
        cli.parse_config(flags={"observables": "fidelity,pop:phi2"})


def test_odd_atom_count_enforced(capsys):
    code, out, err = run_cli(capsys, "basis", "--n", "4")
    assert code == 1
    payload = json.loads(err)
    assert payload["error"] == "ValidationError"
    assert "odd" in payload["message"]


# --- subcommands ------------------------------------------------------------

def test_basis_dump_canonical_order(capsys):
    code, out, _ = run_cli(capsys, "basis")
    assert code == 0
    states = json.loads(out)
    assert len(states) == 11
    assert states[0]["atoms"] == ["g_o", "g_l", "g_r"]
    assert states[2]["photons"]["C1L"] == 1
    assert states[10]["atoms"] == ["g_l", "g_r", "g_o"]


def test_basis_dump_open(capsys):
    code, out, _ = run_cli(capsys, "basis", "--open")
    assert len(json.loads(out)) == 16


def test_hamiltonian_dump(capsys):
    code, out, _ = run_cli(capsys, "hamiltonian", "--g", "1.5", "--v", "0.5")
    assert code == 0
    payload = json.loads(out)
    h_c = payload["h_c"]
    assert h_c[2][1] == [1.5, 0.0]
    assert h_c[3][2] == [0.5, 0.0]
    assert payload["h_d"][1][1] == [2.3, 0.0]


def test_eigen_subcommand(capsys):
    code, out, _ = run_cli(capsys, "eigen", "--g", "1", "--v", "1")
    assert code == 0
    deviation = [l for l in out.splitlines() if l.startswith("max_eigenvalue_dev")]
    assert float(deviation[0].split(",")[1]) <= 1e-10
    angle = [l for l in out.splitlines() if l.startswith("max_principal_angle")]
    assert float(angle[0].split(",")[1]) <= 1e-8


def test_pulses_csv(capsys):
    code, out, err = run_cli(capsys, "pulses", "--kind", "tqd", "--points", "11", "--tf", "72")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "t,omega1,omega3,theta,theta_dot,omega_bar"
    assert len(lines) == 12
    last = [float(x) for x in lines[-1].split(",")]
    assert last[0] == pytest.approx(72.0)
    assert "max" in err  # adiabaticity diagnostic on stderr


def test_simulate_writes_trajectory(tmp_path, capsys):
    code, out, _ = run_cli(
        capsys, "simulate", "--schedule", "tqd", "--tf", "72", "--steps", "4000",
        "--observables", "fidelity,leakage", "--out", str(tmp_path),
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["final"]["fidelity"] >= 0.98
    header = open(summary["csv"]).readline().strip()
    assert header == "t,fidelity,leakage"
    assert summary["diagnostics"]["max_norm_drift"] <= 1e-6


def test_scenario_headline_cli(tmp_path, capsys):
    code, out, _ = run_cli(
        capsys, "scenario", "headline", "--steps", "4000", "--out", str(tmp_path)
    )
    assert code == 0
    summary = json.loads(out)
    fid = summary["observables"]["fidelity"]["final"]
    assert abs(fid - 0.9715) <= 0.01
    rows = open(summary["csv"]).read().strip().splitlines()
    assert rows[0] == "axis1,axis2,observable,value"
    assert any("fidelity" in r for r in rows[1:])


def test_sweep_subcommand(tmp_path, capsys):
    code, out, _ = run_cli(
        capsys, "sweep", "--axis", "kappa_f:0:0.01:3", "--open",
        "--schedule", "tqd", "--tf", "40", "--steps", "2000", "--out", str(tmp_path),
    )
    assert code == 0
    summary = json.loads(out)
    rows = open(summary["csv"]).read().strip().splitlines()
    assert len(rows) == 4
    sidecar = json.loads(open(summary["sidecar"]).read())
    assert sidecar["provenance"]["axes"][0]["name"] == "kappa_f"


def test_sweep_requires_axis(capsys):
    code, _, err = run_cli(capsys, "sweep", "--tf", "40")
    assert code == 1
    assert json.loads(err)["error"] == "ValidationError"


def test_sweep_bad_axis_spec(capsys):
    code, _, err = run_cli(capsys, "sweep", "--axis", "kappa_f:0:0.01")
    assert code == 1
    assert "name:start:stop:num" in json.loads(err)["message"]


def test_outdir_environment_default(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTDIR_ENV, str(tmp_path))
    config = cli.parse_config()
    assert config.out_dir == str(tmp_path)
