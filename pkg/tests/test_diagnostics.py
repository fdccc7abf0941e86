"""Bound checkers: genuine runs pass, constructed forgeries flip the margin
sign, and the probe pseudometric behaves like a metric surrogate."""

import numpy as np
import pytest

import tsl
from tsl.diagnostics import CylinderProbe, ProbeFamily
from tsl.spectral import lr_norm_scalar


@pytest.fixture(scope="module")
def tg_run(grid2d32):
    u0 = tsl.taylor_green(grid2d32)
    f = tsl.Forcing.zero(grid2d32)
    cfg = tsl.SolverConfig(nu=0.1, t0=0.0, t1=0.5, dt=1e-3, sample_stride=50)
    return tsl.solve_nse_2d(u0, f, cfg), f


@pytest.fixture(scope="module")
def abc_run(grid3d):
    u0 = tsl.abc_flow(grid3d)
    f = tsl.Forcing.zero(grid3d)
    cfg = tsl.SolverConfig(nu=0.05, t0=0.0, t1=0.5, dt=1e-3, m=1, sample_stride=50)
    return tsl.solve_galerkin(u0, f, cfg), f


# ---------------------------------------------------------------------------
# Planar a-priori bounds
# ---------------------------------------------------------------------------

def test_apriori_2d_taylor_green(tg_run):
    traj, f = tg_run
    rep = tsl.check_apriori_2d(traj, f, 0.1, 1.0, 2.0)
    assert rep.verdict
    assert all(t.min_margin >= -1e-10 for t in rep.tracks)
    # at the left endpoint the energy bound is an equality
    assert rep.track("energy").margins[0] == 0.0


def test_apriori_2d_flags_scaled_states(tg_run):
    traj, f = tg_run
    forged = traj.copy()
    forged.coeffs[1:] *= 10.0
    rep = tsl.check_apriori_2d(forged, f, 0.1, 1.0, 2.0)
    assert rep.track("energy").min_margin < 0
    assert not rep.verdict


def test_apriori_2d_vorticity_rhs_is_nu_free(grid2d):
    u0 = tsl.taylor_green(grid2d)
    f = tsl.Forcing.zero(grid2d)
    reports = []
    for nu in (1e-2, 1e-3):
        cfg = tsl.SolverConfig(nu=nu, t0=0.0, t1=0.2, dt=2e-3, sample_stride=20)
        traj = tsl.solve_nse_2d(u0, f, cfg)
        reports.append(tsl.check_apriori_2d(traj, f, nu, 1.0, 2.0))
    a, b = (r.track("vorticity-lr") for r in reports)
    assert np.array_equal(a.rhs, b.rhs)
    assert a.meta["nu_independent_rhs"]


def test_apriori_2d_rejects_bad_r(tg_run):
    traj, f = tg_run
    with pytest.raises(ValueError):
        tsl.check_apriori_2d(traj, f, 0.1, 1.0, 1.5)
    with pytest.raises(ValueError):
        tsl.check_apriori_2d(traj, f, 0.1, 1.0, np.inf)


# ---------------------------------------------------------------------------
# Three-dimensional a-priori bounds
# ---------------------------------------------------------------------------

def test_apriori_3d_abc(abc_run):
    traj, f = abc_run
    rep = tsl.check_apriori_3d(traj, f, 0.05, 0.05)
    assert rep.verdict
    assert rep.track("energy-dissipation").min_margin >= -1e-8
    inc = rep.track("dual-increment")
    assert inc.meta["lower_bound_lhs"]
    assert np.isfinite(inc.meta["calibrated_c"])


def test_apriori_3d_zero_trajectory(grid3d):
    z = tsl.trajectory_from_states([tsl.zero_field(grid3d)] * 4,
                                   np.linspace(0, 1, 4), nu=0.1)
    rep = tsl.check_apriori_3d(z, tsl.Forcing.zero(grid3d), 0.1, 0.1)
    for t in rep.tracks:
        assert np.all(t.margins == t.rhs)
        assert t.min_margin >= 0.0


def test_apriori_3d_zero_increment_margin(grid3d):
    # a constant path has zero increments: the lower-bounded LHS vanishes and
    # every pair margin equals the (nonnegative) RHS
    u = tsl.abc_flow(grid3d)
    traj = tsl.trajectory_from_states([u] * 4, np.linspace(0, 0.3, 4), nu=0.1)
    rep = tsl.check_apriori_3d(traj, tsl.Forcing.zero(grid3d), 0.1, 0.1)
    inc = rep.track("dual-increment")
    assert np.all(inc.lhs <= 1e-12)
    assert inc.min_margin >= 0.0


def test_apriori_3d_flags_forged_jump(abc_run):
    traj, f = abc_run
    forged = traj.copy()
    jump = tsl.single_mode_field(traj.grid, (1, 1, 0), (5.0, -5.0, 0.0))
    forged.coeffs[traj.n_samples // 2:] += tsl.leray_project(jump).coeffs
    rep = tsl.check_apriori_3d(forged, f, 0.05, 0.05)
    assert rep.track("dual-increment").min_margin < 0
    assert not rep.verdict


def test_apriori_3d_requires_nu0_at_least_nu(abc_run):
    traj, f = abc_run
    with pytest.raises(ValueError):
        tsl.check_apriori_3d(traj, f, 0.05, 0.01)


# ---------------------------------------------------------------------------
# Truncation-uniform bounds
# ---------------------------------------------------------------------------

def test_galerkin_bounds_abc(abc_run):
    traj, f = abc_run
    rep = tsl.check_galerkin_bounds(traj, f, 0.05)
    assert rep.verdict
    assert all(t.min_margin >= -1e-8 for t in rep.tracks)
    assert np.isfinite(rep.track("v-dual-increment").meta["calibrated_c"])


def test_galerkin_bounds_zero_trajectory(grid3d):
    z = tsl.trajectory_from_states([tsl.zero_field(grid3d)] * 4,
                                   np.linspace(0, 1, 4), nu=0.1, m=1)
    rep = tsl.check_galerkin_bounds(z, tsl.Forcing.zero(grid3d), 0.1)
    for t in rep.tracks:
        assert np.all(t.margins == t.rhs)


def test_galerkin_bounds_flag_doubled_amplitude(abc_run):
    traj, f = abc_run
    forged = traj.copy()
    forged.coeffs[1:] *= 2.0
    rep = tsl.check_galerkin_bounds(forged, f, 0.05)
    assert rep.track("energy-dissipation").min_margin < 0


# ---------------------------------------------------------------------------
# Compact-set membership and tightness
# ---------------------------------------------------------------------------

def test_y2d_solution_is_member(tg_run):
    traj, f = tg_run
    r0 = lr_norm_scalar(tsl.vorticity_2d(traj.state(0)), 2.0)
    rep = tsl.check_y_membership(traj, f, 1.01 * r0, 1.0, "2d", r=2.0)
    assert rep.verdict


def test_y_zero_trajectory_member_everywhere(grid2d):
    z = tsl.trajectory_from_states([tsl.zero_field(grid2d)] * 4,
                                   np.linspace(0, 1, 4), nu=0.1)
    for R in (0.01, 1.0, 100.0):
        assert tsl.check_y_membership(z, tsl.Forcing.zero(grid2d), R, 1.0,
                                      "2d", r=2.0).verdict


def test_y2d_jump_breaks_membership(tg_run):
    traj, f = tg_run
    r0 = lr_norm_scalar(tsl.vorticity_2d(traj.state(0)), 2.0)
    forged = traj.copy()
    kick = tsl.leray_project(tsl.single_mode_field(traj.grid, (1, 1), (30.0, -30.0)))
    forged.coeffs[traj.n_samples // 2:] += kick.coeffs
    rep = tsl.check_y_membership(forged, f, 1.01 * r0, 1.0, "2d", r=2.0)
    assert not rep.verdict


def test_y_variants_and_validation(abc_run):
    traj, f = abc_run
    assert tsl.check_y_membership(traj, f, 30.0, 0.05, "3d").verdict
    assert tsl.check_y_membership(traj, f, 30.0, 0.05, "galerkin").verdict
    with pytest.raises(ValueError):
        tsl.check_y_membership(traj, f, 30.0, 0.05, "4d")
    with pytest.raises(ValueError):
        tsl.check_y_membership(traj, f, 30.0, 0.05, "2d")  # needs r and dim 2


def test_tightness_masses(grid2d):
    f = tsl.Forcing.zero(grid2d)
    cfg = tsl.SolverConfig(nu=0.1, t0=0.0, t1=0.2, dt=2e-3, sample_stride=20)
    spec = tsl.GaussianSpec.isotropic(tsl.taylor_green(grid2d), 0.05, 2.0)
    mu = tsl.sample_gaussian(spec, 4, seed=3)
    rho = tsl.pushforward(tsl.solve_nse_2d, mu, f, cfg)
    r_max = max(lr_norm_scalar(tsl.vorticity_2d(m.state(0)), 2.0)
                for m in rho.members)
    table = tsl.tightness_report([rho], [0.25 * r_max, 1.5 * r_max], "2d", f,
                                 1.0, r=2.0)
    assert table.masses[1, 0] == 0.0          # generous R captures everyone
    assert table.masses[0, 0] > 0.0           # tight R loses mass
    assert np.all(np.diff(table.masses[:, 0]) <= 0)  # nonincreasing in R
    assert table.uniform[1] == 0.0


def test_tightness_forged_member_weight(grid2d):
    f = tsl.Forcing.zero(grid2d)
    cfg = tsl.SolverConfig(nu=0.1, t0=0.0, t1=0.2, dt=2e-3, sample_stride=20)
    atoms = [tsl.taylor_green(grid2d) for _ in range(4)]
    mu = tsl.dirac_ensemble(atoms, [0.25] * 4)
    rho = tsl.pushforward(tsl.solve_nse_2d, mu, f, cfg)
    # forge one member of weight 0.25 far outside every reasonable ball
    rho.members[2].coeffs[1:] *= 50.0
    r0 = lr_norm_scalar(tsl.vorticity_2d(atoms[0]), 2.0)
    table = tsl.tightness_report([rho], [1.05 * r0, 10.0 * r0], "2d", f, 1.0, r=2.0)
    assert table.masses[0, 0] == pytest.approx(0.25)


# ---------------------------------------------------------------------------
# Dissipative comparison
# ---------------------------------------------------------------------------

def test_d_minus_zero_and_shear(grid2d):
    zero = tsl.trajectory_from_states([tsl.zero_field(grid2d)] * 2, [0.0, 1.0])
    assert tsl.d_minus_linf(zero, 0.5) == 0.0
    shear = tsl.trajectory_from_states([tsl.shear_flow(grid2d)] * 2, [0.0, 1.0])
    assert tsl.d_minus_linf(shear, 0.0) == pytest.approx(0.5, abs=1e-10)


def test_d_minus_3d_shear(grid3d):
    shear = tsl.trajectory_from_states([tsl.shear_flow(grid3d)] * 2, [0.0, 1.0])
    assert tsl.d_minus_linf(shear, 0.0) == pytest.approx(0.5, abs=1e-10)


def test_dissipative_u_equals_v(abc_run):
    traj, f = abc_run
    rep = tsl.dissipative_check(traj, traj, f)
    assert np.max(np.abs(rep.track("dissipative").margins)) == 0.0
    assert rep.verdict


def test_dissipative_steady_reference_self(grid3d):
    u = tsl.abc_flow(grid3d)
    steady = tsl.trajectory_from_states([u] * 5, np.linspace(0, 1, 5))
    rep = tsl.dissipative_check(steady, steady, tsl.Forcing.zero(grid3d))
    assert np.max(np.abs(rep.track("dissipative").margins)) == 0.0


def test_dissipative_zero_reference_reduction(abc_run):
    # with v = 0 the inequality collapses to the energy bound; cross-check
    # against the energy balance computed by the same quadrature
    traj, f = abc_run
    zero = tsl.trajectory_from_states([tsl.zero_field(traj.grid)] * traj.n_samples,
                                      traj.times)
    rep = tsl.dissipative_check(traj, zero, f)
    erep = tsl.energy_report(traj, f)
    balance = erep.extras["balance"]
    diss = erep.extras["dissipation_integral"]
    margins_energy = balance[0] - balance
    reduction = 2.0 * margins_energy + 2.0 * traj.cfg.nu * diss
    got = rep.track("dissipative").margins
    assert np.max(np.abs(got - reduction)) <= 1e-10 * max(1.0, np.max(np.abs(got)))


def test_dissipative_viscous_slack_recorded(abc_run):
    traj, f = abc_run
    steady = tsl.trajectory_from_states([tsl.abc_flow(traj.grid)] * traj.n_samples,
                                        traj.times)
    strict = tsl.dissipative_check(traj, steady, f)
    slacked = tsl.dissipative_check(traj, steady, f, viscous_slack_nu=traj.cfg.nu)
    assert strict.track("dissipative").min_margin < 0  # viscous path, same start
    assert slacked.track("dissipative").min_margin >= -1e-10
    assert slacked.track("dissipative").meta["viscous_slack_max"] > 0


def test_dissipative_requires_common_sampling(abc_run, grid3d):
    traj, f = abc_run
    other = tsl.trajectory_from_states([tsl.zero_field(grid3d)] * 3, [0.0, 0.1, 0.2])
    with pytest.raises(ValueError):
        tsl.dissipative_check(traj, other, f)


# ---------------------------------------------------------------------------
# Probe pseudometric
# ---------------------------------------------------------------------------

def _tiny_ensembles(grid, count, seed):
    out = []
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    for i in range(count):
        atoms = [tsl.random_solenoidal(grid, seed=int(rng.integers(1 << 30)))
                 for _ in range(2)]
        members = [tsl.trajectory_from_states([a], [0.0]) for a in atoms]
        out.append(tsl.TrajectoryEnsemble(members, [0.5, 0.5]))
    return out


def test_wstar_identical_is_zero(grid2d):
    rho = _tiny_ensembles(grid2d, 1, 0)[0]
    probes = tsl.build_probe_family(grid2d, [0.0], 8, seed=1)
    assert tsl.wstar_distance(rho, rho, probes) == 0.0


def test_wstar_symmetry_and_triangle(grid2d):
    grid = tsl.make_grid(2, (2 * np.pi, 2 * np.pi), 8)
    probes = tsl.build_probe_family(grid, [0.0], 6, seed=2)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(77)))
    for trial in range(100):
        a, b, c = _tiny_ensembles(grid, 3, 1000 + trial)
        dab = tsl.wstar_distance(a, b, probes)
        dba = tsl.wstar_distance(b, a, probes)
        dac = tsl.wstar_distance(a, c, probes)
        dcb = tsl.wstar_distance(c, b, probes)
        assert dab == dba
        assert dab >= 0.0
        assert dab <= dac + dcb + 1e-14


def test_wstar_monotone_under_enlargement(grid2d):
    a, b = _tiny_ensembles(grid2d, 2, 5)
    small = tsl.build_probe_family(grid2d, [0.0], 8, seed=9)
    large = tsl.build_probe_family(grid2d, [0.0], 16, seed=9)
    assert tsl.wstar_distance(a, b, large) >= tsl.wstar_distance(a, b, small) - 1e-15


def test_wstar_hand_computed_single_probe(grid3d):
    # Dirac ensembles decaying as exp(-nu t): one tanh probe of the flow
    # itself gives |tanh(q e^{-nu T}) - tanh(q e^{-nu' T})| with q = |u0|/50
    f = tsl.Forcing.zero(grid3d)
    u0 = tsl.abc_flow(grid3d)
    mu = tsl.dirac_ensemble([u0], [1.0])
    nu1, nu2, T = 0.2, 0.1, 0.5
    rho1 = tsl.pushforward(tsl.solve_galerkin, mu, f,
                           tsl.SolverConfig(nu=nu1, t0=0, t1=T, dt=1e-3, m=1,
                                            sample_stride=100))
    rho2 = tsl.pushforward(tsl.solve_galerkin, mu, f,
                           tsl.SolverConfig(nu=nu2, t0=0, t1=T, dt=1e-3, m=1,
                                            sample_stride=100))
    probe = CylinderProbe((T,), (u0,), lambda x: float(np.tanh(x[0] / 50.0)),
                          bound=1.0, lip=1.0 / 50.0, name="decay")
    fam = ProbeFamily([probe])
    got = tsl.wstar_distance(rho1, rho2, fam)
    q = tsl.norm_h(u0) / 50.0
    want = abs(np.tanh(q * np.exp(-nu1 * T)) - np.tanh(q * np.exp(-nu2 * T)))
    assert got == pytest.approx(want, rel=1e-8)


def test_probe_family_rejects_empty():
    with pytest.raises(ValueError):
        ProbeFamily([])


def test_wstar_two_atoms_differing_in_one_mode(grid2d):
    # hand-evaluated three-probe family on single-state ensembles whose only
    # difference is the amplitude of one mode
    base = tsl.single_mode_field(grid2d, (1, 0), (0.0, 1.0))
    bumped = tsl.single_mode_field(grid2d, (1, 0), (0.0, 1.5))
    rho1 = tsl.TrajectoryEnsemble([tsl.trajectory_from_states([base], [0.0])], [1.0])
    rho2 = tsl.TrajectoryEnsemble([tsl.trajectory_from_states([bumped], [0.0])], [1.0])
    gprobe = tsl.single_mode_field(grid2d, (1, 0), (0.0, 1.0))
    hprobe = tsl.single_mode_field(grid2d, (0, 1), (1.0, 0.0))
    probes = ProbeFamily([
        CylinderProbe((0.0,), (gprobe,), lambda x: float(np.tanh(x[0])), 1.0, 1.0),
        CylinderProbe((0.0,), (hprobe,), lambda x: float(np.tanh(x[0])), 1.0, 1.0),
        CylinderProbe((0.0,), (gprobe,), lambda x: float(np.cos(x[0])), 1.0, 1.0),
    ])
    # pairing with the normalized g: |u|_H of the shared mode
    q1 = tsl.inner_h(base, gprobe) / tsl.norm_h(gprobe)
    q2 = tsl.inner_h(bumped, gprobe) / tsl.norm_h(gprobe)
    want = max(abs(np.tanh(q1) - np.tanh(q2)), 0.0, abs(np.cos(q1) - np.cos(q2)))
    assert tsl.wstar_distance(rho1, rho2, probes) == pytest.approx(want, rel=1e-12)
