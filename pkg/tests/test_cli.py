"""CLI subcommands and scenario runners end to end on desk-sized configs."""

import json
import os

import numpy as np
import pytest

import tsl
from tsl.cli import main
from tsl.snapshots import save_ensemble, save_trajectory

TWO_PI = 2.0 * np.pi
LENGTHS2 = [TWO_PI, TWO_PI]
LENGTHS3 = [TWO_PI, TWO_PI, TWO_PI]


def _config_2d(outdir, n_atoms=4):
    return {
        "scenario": "inviscid2d",
        "grid": {"dim": 2, "lengths": LENGTHS2, "modes_per_dim": 16},
        "time": {"t0": 0.0, "t1": 0.2, "dt": 0.004, "sample_stride": 10},
        "forcing": {"type": "zero"},
        "initial_measure": {"type": "gaussian", "mean": {"preset": "taylor_green"},
                            "sigma": 0.05, "sigma_max_k2": 2.0,
                            "n_atoms": n_atoms, "seed": 7},
        "nu_ladder": [0.1, 0.05, 0.025],
        "r": 2.0, "nu0": 1.0,
        "R_ladder": [4.0, 8.0, 12.0],
        "probes": {"count": 8, "times": [0.1, 0.2], "seed": 3},
        "output_dir": str(outdir),
    }


def test_run_inviscid_2d_reports(tmp_path):
    out = tmp_path / "out"
    summary = tsl.run_scenario(tsl.ExperimentConfig.from_dict(_config_2d(out)))
    assert summary["pass"]
    for name in ("margins.csv", "distances.csv", "tightness.csv", "summary.json"):
        assert (out / name).exists()
    rows = (out / "tightness.csv").read_text().strip().splitlines()
    assert rows[0] == "R,nu=0.1,nu=0.05,nu=0.025,max"
    # masses nonincreasing in R
    masses = np.array([[float(x) for x in row.split(",")[1:-1]] for row in rows[1:]])
    assert np.all(np.diff(masses, axis=0) <= 0)


def test_run_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    tsl.run_scenario(tsl.ExperimentConfig.from_dict(_config_2d(a)))
    tsl.run_scenario(tsl.ExperimentConfig.from_dict(_config_2d(b)))
    for name in ("margins.csv", "distances.csv", "tightness.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_run_identical_ladder_entries_distance_zero(tmp_path):
    cfg = _config_2d(tmp_path / "out", n_atoms=2)
    cfg["nu_ladder"] = [0.1, 0.05]
    summary_a = tsl.run_scenario(tsl.ExperimentConfig.from_dict(cfg))
    # push the same measure at one viscosity twice: the probe gap vanishes
    grid = tsl.make_grid(2, LENGTHS2, 16)
    mu = tsl.dirac_ensemble([tsl.taylor_green(grid)], [1.0])
    scfg = tsl.SolverConfig(nu=0.1, t0=0.0, t1=0.2, dt=4e-3, sample_stride=10)
    rho_a = tsl.pushforward(tsl.solve_nse_2d, mu, tsl.Forcing.zero(grid), scfg)
    rho_b = tsl.pushforward(tsl.solve_nse_2d, mu, tsl.Forcing.zero(grid), scfg)
    probes = tsl.build_probe_family(grid, [0.2], 8, seed=3)
    assert tsl.wstar_distance(rho_a, rho_b, probes) == 0.0
    assert all(np.isfinite(d) for d in summary_a["distances"])


def test_run_galerkin_3d(tmp_path):
    out = tmp_path / "outg"
    cfg = {
        "scenario": "galerkin3d",
        "grid": {"dim": 3, "lengths": LENGTHS3, "modes_per_dim": 16},
        "time": {"t0": 0.0, "t1": 0.2, "dt": 0.004, "sample_stride": 10},
        "initial_measure": {"type": "dirac", "fields": [{"preset": "abc"}]},
        "m_ladder": [1, 2],
        "nu": 0.05, "nu0": 1.0,
        "R_ladder": [30.0],
        "probes": {"count": 6, "times": [0.2], "seed": 3},
        "output_dir": str(out),
    }
    summary = tsl.run_scenario(tsl.ExperimentConfig.from_dict(cfg))
    assert summary["pass"]
    assert summary["initial_projection_exact"] == [True, True]
    # the Beltrami support sits inside the first shell: refining changes nothing
    assert summary["distances"][0] <= 1e-10


def test_run_inviscid_3d(tmp_path):
    out = tmp_path / "out3"
    cfg = {
        "scenario": "inviscid3d",
        "grid": {"dim": 3, "lengths": LENGTHS3, "modes_per_dim": 16},
        "time": {"t0": 0.0, "t1": 0.2, "dt": 0.004, "sample_stride": 10},
        "initial_measure": {"type": "dirac", "fields": [{"preset": "abc"}]},
        "nu_ladder": [0.1, 0.05],
        "m_star": 2, "nu0": 0.1,
        "reference": {"preset": "abc"},
        "R_ladder": [28.0, 40.0],
        "probes": {"count": 6, "times": [0.2], "seed": 3},
        "output_dir": str(out),
    }
    summary = tsl.run_scenario(tsl.ExperimentConfig.from_dict(cfg))
    assert summary["pass"]
    assert "proxy" in summary
    data = json.loads((out / "summary.json").read_text())
    assert data["scenario"] == "inviscid3d"


def test_ladder_monotonicity_enforced(tmp_path):
    cfg = _config_2d(tmp_path / "x")
    cfg["nu_ladder"] = [0.05, 0.1]
    with pytest.raises(ValueError):
        tsl.run_scenario(tsl.ExperimentConfig.from_dict(cfg))


def test_cli_run_and_exit_code(tmp_path, capsys):
    cfile = tmp_path / "cfg.json"
    cfile.write_text(json.dumps(_config_2d(tmp_path / "out", n_atoms=2)))
    assert main(["run", str(cfile)]) == 0
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert out["pass"] is True


def test_cli_check_snapshot(tmp_path, capsys, grid2d):
    cfg = tsl.SolverConfig(nu=0.1, t0=0.0, t1=0.2, dt=4e-3, sample_stride=10)
    traj = tsl.solve_nse_2d(tsl.taylor_green(grid2d), tsl.Forcing.zero(grid2d), cfg)
    snap = tmp_path / "t.tsl"
    save_trajectory(snap, traj)
    assert main(["check", str(snap), "--family", "apriori2d",
                 "--nu0", "1.0", "--r", "2"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["verdict"] is True
    assert main(["check", str(snap), "--family", "y2d", "--R", "7.0",
                 "--nu0", "1.0", "--r", "2"]) == 0
    capsys.readouterr()
    assert main(["check", str(snap), "--family", "energy"]) == 0


def test_cli_check_manifest_and_energy(tmp_path, capsys, grid3d):
    mu = tsl.dirac_ensemble([tsl.abc_flow(grid3d)], [1.0])
    cfg = tsl.SolverConfig(nu=0.05, t0=0.0, t1=0.2, dt=4e-3, m=1, sample_stride=10)
    rho = tsl.pushforward(tsl.solve_galerkin, mu, tsl.Forcing.zero(grid3d), cfg)
    manifest = save_ensemble(tmp_path / "ens", rho)
    assert main(["check", str(manifest), "--family", "galerkin"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["members"] == 1
    assert main(["check", str(manifest), "--family", "energy"]) == 0


def test_cli_distance_and_sample(tmp_path, capsys):
    grid = tsl.make_grid(2, LENGTHS2, 16)
    spec_path = tmp_path / "gspec.json"
    spec_path.write_text(json.dumps({
        "grid": {"dim": 2, "lengths": LENGTHS2, "modes_per_dim": 16},
        "mean": {"preset": "taylor_green"}, "sigma": 0.05, "sigma_max_k2": 2.0}))
    out_mu = tmp_path / "mu"
    assert main(["sample", str(spec_path), "--n", "3", "--seed", "5",
                 "--out", str(out_mu)]) == 0
    capsys.readouterr()

    mu = tsl.sample_gaussian(
        tsl.GaussianSpec.isotropic(tsl.taylor_green(grid), 0.05, 2.0), 3, 5)
    f = tsl.Forcing.zero(grid)
    ra = tsl.pushforward(tsl.solve_nse_2d, mu, f,
                         tsl.SolverConfig(nu=0.1, t0=0, t1=0.2, dt=4e-3, sample_stride=10))
    rb = tsl.pushforward(tsl.solve_nse_2d, mu, f,
                         tsl.SolverConfig(nu=0.05, t0=0, t1=0.2, dt=4e-3, sample_stride=10))
    ma = save_ensemble(tmp_path / "ea", ra)
    mb = save_ensemble(tmp_path / "eb", rb)
    probes = tmp_path / "probes.json"
    probes.write_text(json.dumps({"count": 4, "times": [0.2], "seed": 1}))
    assert main(["distance", str(ma), str(mb), "--probes", str(probes)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert np.isfinite(payload["distance"])


def test_cli_sample_reproducible(tmp_path):
    spec_path = tmp_path / "gspec.json"
    spec_path.write_text(json.dumps({
        "grid": {"dim": 2, "lengths": LENGTHS2, "modes_per_dim": 16},
        "mean": {"preset": "taylor_green"}, "sigma": 0.05, "sigma_max_k2": 2.0}))
    main(["sample", str(spec_path), "--n", "2", "--seed", "9",
          "--out", str(tmp_path / "m1")])
    main(["sample", str(spec_path), "--n", "2", "--seed", "9",
          "--out", str(tmp_path / "m2")])
    for name in ("atom_0000.tsl", "atom_0001.tsl"):
        assert (tmp_path / "m1" / name).read_bytes() == (tmp_path / "m2" / name).read_bytes()


def test_threaded_pushforward_matches_sequential(tmp_path, grid2d, monkeypatch):
    mu = tsl.sample_gaussian(
        tsl.GaussianSpec.isotropic(tsl.taylor_green(grid2d), 0.1, 2.0), 4, 1)
    cfg = tsl.SolverConfig(nu=0.1, t0=0.0, t1=0.1, dt=5e-3, sample_stride=4)
    f = tsl.Forcing.zero(grid2d)
    seq = tsl.pushforward(tsl.solve_nse_2d, mu, f, cfg)
    monkeypatch.setenv("TSL_THREADS", "4")
    par = tsl.pushforward(tsl.solve_nse_2d, mu, f, cfg)
    for a, b in zip(seq.members, par.members):
        assert np.array_equal(a.coeffs, b.coeffs)
