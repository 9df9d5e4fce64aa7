import json

import numpy as np
import pytest

from cavityghz import experiments, model
from cavityghz.errors import ConfigurationError, ValidationError
from cavityghz.experiments import SweepAxis


def test_registry_names():
    names = experiments.available_scenarios()
    for expected in (
        "fig4", "fig5", "fig6", "fig7", "fig8a", "fig8b",
        "fig9a", "fig9b", "fig10a", "fig10b", "headline", "natom",
    ):
        assert expected in names


def test_unknown_scenario():
    with pytest.raises(ConfigurationError, match="unknown scenario"):
        experiments.run_scenario("fig99")


def test_axis_validation():
    with pytest.raises(ValidationError):
        SweepAxis("gamma", ())
    with pytest.raises(ValidationError):
        SweepAxis("gamma", (0.0, 2.0, 1.0))


def test_axis_semantics():
    p = model.SystemParams()
    q, s = experiments._apply_axis(p, 1.0, "dg", 0.1)
    assert q.g == pytest.approx(1.1) and q.v == 1.0 and s == 1.0
    q, s = experiments._apply_axis(p, 1.0, "domega0", -0.1)
    assert q == p and s == pytest.approx(0.9)
    q, s = experiments._apply_axis(p, 1.0, "dT", 0.1)
    assert q.t_f == pytest.approx(1.1 * p.t_f)
    assert q.tc / q.t_f == pytest.approx(p.tc / p.t_f)
    q, s = experiments._apply_axis(p, 1.0, "kappa_f", 0.004)
    assert q.kappa_f == 0.004
    with pytest.raises(ConfigurationError):
        experiments._apply_axis(p, 1.0, "bogus", 1.0)


def test_natom_operating_points_are_valid():
    for n in (3, 5, 7):
        p = experiments.natom_params(n)
        assert p.n_atoms == n and p.t_f == pytest.approx(72.0)
    with pytest.raises(ConfigurationError):
        experiments.natom_params(9)


def quick(name, grid=3, steps=2000, threads=1):
    return experiments.run_scenario(name, {"grid": grid, "steps": steps}, threads=threads)


def test_parallel_equals_serial_bitwise():
    serial = quick("fig10b")
    parallel = quick("fig10b", threads=4)
    for a, b in zip(serial.blocks, parallel.blocks):
        assert np.array_equal(a.values, b.values)


def test_rerun_is_deterministic():
    a = quick("fig10a")
    b = quick("fig10a")
    for x, y in zip(a.blocks, b.blocks):
        assert np.array_equal(x.values, y.values)
    assert a.provenance["hash"] == b.provenance["hash"]


def test_fig6_surface_shape():
    res = quick("fig6", grid=3, steps=4000)
    block = res.block("fidelity")
    assert [name for name, _ in block.axes] == ["tf", "delta"]
    assert block.values.shape == (3, 3)
    # long-time high-detuning corner transfers well; the fast low-detuning
    # corner cannot (the reduced coupling needs the detuning)
    assert block.values[-1, -1] >= 0.97
    assert block.values[0, 0] < block.values[-1, -1]


def test_fig8a_monotone_in_cavity_loss():
    res = experiments.run_scenario("fig8a", {"grid": 5, "steps": 4000})
    kc = res.block("fidelity:kappa_c").values
    gamma = res.block("fidelity:gamma").values
    kf = res.block("fidelity:kappa_f").values
    assert np.all(np.diff(kc) < 0)
    assert np.all(np.diff(gamma) < 0)
    assert kf[0] - kf[-1] < 0.01  # near-flat in fiber loss
    assert kc[-1] < kf[-1]  # cavity loss dominates


def test_fig9_monotone_edges():
    res = experiments.run_scenario("fig9a", {"grid": 3, "steps": 4000})
    surf = res.block("fidelity").values
    assert surf.shape == (3, 3)
    assert np.all(np.diff(surf[:, 0]) < 0)  # along atomic emission
    assert np.all(np.diff(surf[0, :]) < 0)  # along cavity loss


def test_series_scenario_records_time_axis():
    res = experiments.run_scenario("fig5", {"steps": 2000, "record_every": 500})
    block = res.block("pop:phi1")
    names = [name for name, _ in block.axes]
    assert names == ["t_frac"]
    fracs = block.axes[0][1]
    assert fracs[0] == 0.0 and fracs[-1] == 1.0
    assert block.values[0] == pytest.approx(1.0)  # starts in the pump state


def test_fig7_panels_prefix_observables():
    res = experiments.run_scenario("fig7", {"steps": 2000, "record_every": 1000})
    names = {b.observable for b in res.blocks}
    assert "fidelity:tqd" in names and "fidelity:adiabatic" in names
    tqd_final = res.block("fidelity:tqd").values[-1]
    adiabatic_final = res.block("fidelity:adiabatic").values[-1]
    assert tqd_final - adiabatic_final >= 0.15


def test_param_override_applies():
    res = experiments.run_scenario("headline", {"steps": 2000, "kappa_c": 0.0})
    assert res.provenance["params"]["kappa_c"] == 0.0
    baseline = experiments.run_scenario("headline", {"steps": 2000})
    assert res.block("fidelity").values > baseline.block("fidelity").values


def test_result_rows_long_format():
    res = quick("fig10a")
    rows = experiments.result_rows(res)
    assert len(rows) == 9
    ax1, ax2, obs, val = rows[0]
    assert obs == "fidelity" and 0.0 <= val <= 1.0
    assert ax1 == pytest.approx(-0.1) and ax2 == pytest.approx(-0.1)


def test_write_result_roundtrip(tmp_path):
    res = quick("natom", steps=2000)
    csv_path, json_path = experiments.write_result(res, tmp_path)
    header, *lines = open(csv_path).read().strip().split("\n")
    assert header == "axis1,axis2,observable,value"
    assert len(lines) == 3
    sidecar = json.loads(open(json_path).read())
    assert sidecar["provenance"]["scenario"] == "natom"
    assert sidecar["provenance"]["hash"] in csv_path
    # sidecar params reconstruct the exact configuration
    params = model.SystemParams.from_dict(sidecar["provenance"]["params"])
    assert params == experiments.natom_params(3)


def test_cell_count_and_diag_summary():
    res = quick("fig10b")
    assert res.block("fidelity").values.size == 9
    assert res.diagnostics["max_norm_drift"] <= 1e-6
    assert res.diagnostics["cell_errors"] == []


def test_failing_cell_recorded_without_aborting():
    # the long-horizon cell is hopelessly under-resolved at 1000 steps; the
    # sweep must finish, flag it, and leave the healthy cell intact
    scenario = experiments.Scenario(
        name="drift-check",
        description="deliberately under-resolved cell",
        params=model.SystemParams().with_t_f(40.0),
        schedule_kind="adiabatic",
        axes=(SweepAxis("tf", (40.0, 4000.0)),),
        steps=1000,
    )
    res = experiments.run_scenario(scenario)
    errors = res.diagnostics["cell_errors"]
    assert [e["cell"] for e in errors] == [1]
    assert "max_norm_drift" in errors[0]["problems"][0]
    healthy = res.block("fidelity").values[0]
    assert 0.0 <= healthy <= 1.0
