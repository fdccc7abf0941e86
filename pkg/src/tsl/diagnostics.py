"""Numerical verification of the a-priori inequality families, compact-set
membership, ensemble tightness, the dissipative-solution comparison, and a
finite-probe weak-star convergence surrogate.

Margins are always RHS - LHS, so a negative margin is a violation.  Checkers
accept the undetermined universal constants as parameters (default 1, except
where an exact value is known) and also report the smallest constant that
would make every margin nonnegative (calibration).  Tracks whose LHS is a
certified lower bound (the (W^{1,inf})' increments) carry falsification-only
semantics.  Time integrals inside inequality right-hand sides use the
trapezoid rule on the sample instants; the dissipative-solution comparison
uses the same fourth-order quadrature as the energy balance, because its
degenerate cases are identities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import Forcing, Trajectory, time_derivative
from .measures import TrajectoryEnsemble
from .quadrature import cumsimps, cumtrapz
from .reports import BoundReport, MarginTrack
from .spectral import (ScalarField, SpectralField, _gradient_values,
                       _polarizations, dual_w1inf_lower, inner_h,
                       lr_norm_scalar, norm_h, norm_v, norm_v_dual,
                       nonlinear_term, single_mode_field, vorticity_2d)

_PAIR_CAP = 32


# ---------------------------------------------------------------------------
# Shared resolved-quantity helpers
# ---------------------------------------------------------------------------

def _forcing_h_sq(f: Forcing, times: np.ndarray) -> np.ndarray:
    """|f(t_j)|^2 in H at the sample instants."""
    if f.is_zero:
        return np.zeros(len(times))
    vol = f.grid.volume
    return np.array([vol * float(np.sum(np.abs(f.eval(t)) ** 2)) for t in times])


def _forcing_curl_lr(f: Forcing, times: np.ndarray, r: float) -> np.ndarray:
    """||curl f(t_j)||_{L^r} on a planar grid."""
    if f.is_zero:
        return np.zeros(len(times))
    g = f.grid
    out = np.empty(len(times))
    for j, t in enumerate(times):
        c = f.eval(t)
        w = 1j * (g.k[0] * c[1] - g.k[1] * c[0])
        out[j] = lr_norm_scalar(ScalarField(g, w), r)
    return out


def _dtu_vdual_sq(traj: Trajectory) -> np.ndarray:
    """||d/dt u(t_j)||^2 in V' from finite differences of the samples."""
    du = time_derivative(traj)
    return np.array([norm_v_dual(SpectralField(traj.grid, du[j])) ** 2
                     for j in range(traj.n_samples)])


def _pair_indices(n: int, cap: int = _PAIR_CAP) -> list:
    """Ordered sample pairs (i < j); all pairs up to `cap` points, then a
    deterministic stride subset (consecutive strided points always included)."""
    if n <= cap:
        idx = np.arange(n)
    else:
        idx = np.unique(np.round(np.linspace(0, n - 1, cap)).astype(int))
    return [(int(a), int(b)) for ai, a in enumerate(idx) for b in idx[ai + 1:]]


# ---------------------------------------------------------------------------
# A-priori estimate checkers
# ---------------------------------------------------------------------------

def check_apriori_2d(traj: Trajectory, f: Forcing, nu: float, nu0: float,
                     r: float, c: float = 1.0, tolerance: float = 1e-8) -> BoundReport:
    """Planar a-priori bounds: exponential energy growth envelope, the
    nu-uniform L^r vorticity envelope, and the dual-norm bound on the time
    derivative (with input constant c, default 1, plus its calibrated value).
    """
    if traj.grid.dim != 2:
        raise ValueError("check_apriori_2d requires a planar trajectory")
    if not (2 <= r < np.inf):
        raise ValueError(f"r must be in [2, inf), got {r}")
    if nu0 <= 0:
        raise ValueError("nu0 must be positive")
    g = traj.grid
    lam = g.lambda1
    times = traj.times
    dt0 = times - times[0]
    f_sq = cumtrapz(_forcing_h_sq(f, times), times)          # ||f||^2_{L^2(t0,t;H)}
    curl_r = cumtrapz(_forcing_curl_lr(f, times, r) ** r, times)

    h_sq = np.array([norm_h(traj.state(j)) ** 2 for j in range(traj.n_samples)])
    vort_r = np.array([lr_norm_scalar(vorticity_2d(traj.state(j)), r) ** r
                       for j in range(traj.n_samples)])

    rhs_energy = (h_sq[0] + f_sq / (nu0 * lam)) * np.exp(nu0 * lam * dt0)
    energy = MarginTrack("energy", rhs_energy - h_sq, h_sq, rhs_energy,
                         meta={"times": times})

    rhs_vort = (vort_r[0] + (nu0 * lam) ** (1.0 - r) * curl_r) \
        * np.exp((r - 1.0) * nu0 * lam * dt0)
    vorticity = MarginTrack("vorticity-lr", rhs_vort - vort_r, vort_r, rhs_vort,
                            meta={"times": times, "nu_independent_rhs": True, "r": r})

    lhs_dt = np.sqrt(cumtrapz(_dtu_vdual_sq(traj), times))
    growth = (h_sq[0] + f_sq / (nu0 * lam)) * np.exp(nu0 * lam * dt0)
    bracket = vort_r[0] + (nu0 * lam) ** (1.0 - r) * curl_r
    unit_rhs = (lam ** -0.5 * np.sqrt(f_sq)
                + lam ** (-0.5 + 1.0 / r) * (nu + growth) * bracket
                * np.exp((r - 1.0) * nu0 * lam * dt0))
    rhs_dt = c * unit_rhs
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(unit_rhs > 0, lhs_dt / np.where(unit_rhs > 0, unit_rhs, 1.0), 0.0)
    dt_track = MarginTrack("time-derivative-dual", rhs_dt - lhs_dt, lhs_dt, rhs_dt,
                           meta={"times": times, "c": c,
                                 "calibrated_c": float(np.max(ratio, initial=0.0))})

    return BoundReport("apriori-2d", {"nu": nu, "nu0": nu0, "r": r, "c": c},
                       [energy, vorticity, dt_track], tolerance)


def check_apriori_3d(traj: Trajectory, f: Forcing, nu: float, nu0: float,
                     c: float = 1.0, probe_budget: int = 16,
                     tolerance: float = 1e-8) -> BoundReport:
    """Energy-with-dissipation envelope plus the dual-norm increment bound.

    The increment LHS comes from the probe lower bound on the (W^{1,inf})'
    norm, so that track can falsify the bound but never certify it.
    """
    if nu <= 0 or nu0 < nu:
        raise ValueError("need nu0 >= nu > 0")
    g = traj.grid
    lam = g.lambda1
    times = traj.times
    dt0 = times - times[0]
    f_sq = cumtrapz(_forcing_h_sq(f, times), times)

    h_sq = np.array([norm_h(traj.state(j)) ** 2 for j in range(traj.n_samples)])
    v_sq = np.array([norm_v(traj.state(j)) ** 2 for j in range(traj.n_samples)])
    damped = cumtrapz(np.exp(-nu0 * lam * dt0) * v_sq, times)
    lhs_energy = h_sq + 2.0 * nu * np.exp(nu0 * lam * dt0) * damped
    rhs_energy = np.exp(nu0 * lam * dt0) * (h_sq[0] + f_sq / (nu0 * lam))
    energy = MarginTrack("energy-dissipation", rhs_energy - lhs_energy,
                         lhs_energy, rhs_energy, meta={"times": times})

    pairs = _pair_indices(traj.n_samples)
    bracket = h_sq[0] + f_sq / (nu0 * lam)
    lhs_inc, rhs_inc, first_term = [], [], []
    for (i, j) in pairs:
        diff = SpectralField(g, traj.coeffs[j] - traj.coeffs[i])
        lhs = dual_w1inf_lower(diff, probe_budget)
        gap = times[j] - times[i]
        g1 = (np.sqrt(gap) * (np.sqrt(nu) + np.sqrt(nu0)) * lam ** -0.75
              * np.exp(0.5 * nu0 * lam * dt0[j]) * np.sqrt(bracket[j]))
        g2 = gap * np.exp(nu0 * lam * dt0[j]) * bracket[j]
        lhs_inc.append(lhs)
        first_term.append(g1)
        rhs_inc.append(c * g1 + g2)
    lhs_inc = np.asarray(lhs_inc)
    rhs_inc = np.asarray(rhs_inc)
    first_term = np.asarray(first_term)
    with np.errstate(divide="ignore", invalid="ignore"):
        cal = np.where(first_term > 0,
                       (lhs_inc - (rhs_inc - c * first_term)) /
                       np.where(first_term > 0, first_term, 1.0), 0.0)
    increment = MarginTrack(
        "dual-increment", rhs_inc - lhs_inc, lhs_inc, rhs_inc,
        meta={"pairs": pairs, "c": c, "lower_bound_lhs": True,
              "calibrated_c": float(max(0.0, np.max(cal, initial=0.0)))})

    return BoundReport("apriori-3d", {"nu": nu, "nu0": nu0, "c": c},
                       [energy, increment], tolerance)


def check_galerkin_bounds(traj: Trajectory, f: Forcing, nu: float,
                          c: float = 1.0, tolerance: float = 1e-8) -> BoundReport:
    """Truncation-uniform bounds for shell-truncated runs: the energy plus
    dissipation budget, and the V'-norm increment bound computed exactly."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    g = traj.grid
    lam = g.lambda1
    times = traj.times
    f_sq = cumtrapz(_forcing_h_sq(f, times), times)

    h_sq = np.array([norm_h(traj.state(j)) ** 2 for j in range(traj.n_samples)])
    v_sq = np.array([norm_v(traj.state(j)) ** 2 for j in range(traj.n_samples)])
    lhs_energy = h_sq + nu * cumtrapz(v_sq, times)
    rhs_energy = h_sq[0] + f_sq / (nu * lam)
    energy = MarginTrack("energy-dissipation", rhs_energy - lhs_energy,
                         lhs_energy, rhs_energy, meta={"times": times})

    pairs = _pair_indices(traj.n_samples)
    bracket = h_sq[0] + f_sq / (nu * lam)
    lhs_inc, unit_rhs = [], []
    for (i, j) in pairs:
        diff = SpectralField(g, traj.coeffs[j] - traj.coeffs[i])
        gap = times[j] - times[i]
        lhs_inc.append(norm_v_dual(diff))
        unit_rhs.append(np.sqrt(nu * gap * bracket[j])
                        + nu ** -0.75 * gap ** 0.25 * bracket[j])
    lhs_inc = np.asarray(lhs_inc)
    unit_rhs = np.asarray(unit_rhs)
    rhs_inc = c * unit_rhs
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(unit_rhs > 0, lhs_inc / np.where(unit_rhs > 0, unit_rhs, 1.0), 0.0)
    increment = MarginTrack("v-dual-increment", rhs_inc - lhs_inc, lhs_inc, rhs_inc,
                            meta={"pairs": pairs, "c": c,
                                  "calibrated_c": float(np.max(ratio, initial=0.0))})

    return BoundReport("galerkin-bounds", {"nu": nu, "c": c},
                       [energy, increment], tolerance)


# ---------------------------------------------------------------------------
# Compact-set membership and tightness
# ---------------------------------------------------------------------------

_Y_VARIANTS = ("2d", "3d", "galerkin")


@dataclass
class _YData:
    """Per-member resolved quantities reused across the R ladder."""

    variant: str
    times: np.ndarray
    f_sq: np.ndarray
    curl_r: Optional[np.ndarray]
    lhs_first: np.ndarray
    pairs: list
    lhs_pairs: np.ndarray
    pair_gaps: np.ndarray
    pair_t_end: np.ndarray


def _y_member_data(traj: Trajectory, f: Forcing, variant: str,
                   r: Optional[float], nu: Optional[float],
                   probe_budget: int) -> _YData:
    g = traj.grid
    times = traj.times
    f_sq = cumtrapz(_forcing_h_sq(f, times), times)
    n = traj.n_samples
    if variant == "2d":
        curl_r = cumtrapz(_forcing_curl_lr(f, times, r) ** r, times)
        vort = np.array([lr_norm_scalar(vorticity_2d(traj.state(j)), r)
                         for j in range(n)])
        lhs_dt = np.sqrt(cumtrapz(_dtu_vdual_sq(traj), times))
        return _YData(variant, times, f_sq, curl_r, vort, [], lhs_dt,
                      np.array([]), np.array([]))
    h_sq = np.array([norm_h(traj.state(j)) ** 2 for j in range(n)])
    if variant == "galerkin":
        v_sq = np.array([norm_v(traj.state(j)) ** 2 for j in range(n)])
        lhs_first = h_sq + nu * cumtrapz(v_sq, times)
    else:
        lhs_first = h_sq
    pairs = _pair_indices(n)
    lhs_pairs = np.empty(len(pairs))
    gaps = np.empty(len(pairs))
    t_end = np.empty(len(pairs), dtype=int)
    for p, (i, j) in enumerate(pairs):
        diff = SpectralField(g, traj.coeffs[j] - traj.coeffs[i])
        if variant == "galerkin":
            lhs_pairs[p] = norm_v_dual(diff)
        else:
            lhs_pairs[p] = dual_w1inf_lower(diff, probe_budget)
        gaps[p] = times[j] - times[i]
        t_end[p] = j
    return _YData(variant, times, f_sq, None, lhs_first, pairs, lhs_pairs,
                  gaps, t_end)


def _y_tracks(data: _YData, R: float, nu0: float, r: Optional[float],
              nu: Optional[float], c: float, lam: float) -> list:
    times = data.times
    dt0 = times - times[0]
    if data.variant == "2d":
        rhs1 = ((R ** r + (nu0 * lam) ** (1.0 - r) * data.curl_r) ** (1.0 / r)
                * np.exp((r - 1.0) * nu0 * lam * dt0 / r))
        t1 = MarginTrack("vorticity-sup", rhs1 - data.lhs_first,
                         data.lhs_first, rhs1, meta={"times": times, "r": r})
        growth = (R ** 2 + data.f_sq / (nu0 * lam)) * np.exp(nu0 * lam * dt0)
        rhs2 = c * (lam ** -0.5 * np.sqrt(data.f_sq)
                    + lam ** (-0.5 + 1.0 / r) * (nu0 + growth)
                    * (R ** r + (nu0 * lam) ** (1.0 - r) * data.curl_r)
                    * np.exp((r - 1.0) * nu0 * lam * dt0))
        t2 = MarginTrack("time-derivative-dual", rhs2 - data.lhs_pairs,
                         data.lhs_pairs, rhs2, meta={"times": times, "c": c})
        return [t1, t2]
    if data.variant == "3d":
        bracket = R ** 2 + data.f_sq / (nu0 * lam)
        rhs1 = bracket * np.exp(nu0 * lam * dt0)
        t1 = MarginTrack("energy", rhs1 - data.lhs_first, data.lhs_first, rhs1,
                         meta={"times": times})
        bj = bracket[data.pair_t_end]
        ej = np.exp(nu0 * lam * dt0[data.pair_t_end])
        rhs2 = (c * np.sqrt(data.pair_gaps) * np.sqrt(nu0) * lam ** -0.75
                * np.sqrt(ej) * np.sqrt(bj) + data.pair_gaps * ej * bj)
        t2 = MarginTrack("dual-increment", rhs2 - data.lhs_pairs,
                         data.lhs_pairs, rhs2,
                         meta={"pairs": data.pairs, "c": c, "lower_bound_lhs": True})
        return [t1, t2]
    # galerkin
    bracket = R ** 2 + data.f_sq / (nu * lam)
    rhs1 = bracket
    t1 = MarginTrack("energy-dissipation", rhs1 - data.lhs_first,
                     data.lhs_first, rhs1, meta={"times": times})
    bj = bracket[data.pair_t_end]
    rhs2 = c * (np.sqrt(nu * data.pair_gaps * bj)
                + nu ** -0.75 * data.pair_gaps ** 0.25 * bj)
    t2 = MarginTrack("v-dual-increment", rhs2 - data.lhs_pairs,
                     data.lhs_pairs, rhs2, meta={"pairs": data.pairs, "c": c})
    return [t1, t2]


def check_y_membership(traj: Trajectory, f: Forcing, R: float, nu0: float,
                       variant: str, r: Optional[float] = None,
                       nu: Optional[float] = None, c: float = 1.0,
                       probe_budget: int = 16,
                       tolerance: float = 1e-8) -> BoundReport:
    """Membership of a path in the inequality-defined compact trajectory set.

    variant "2d" needs the vorticity exponent r; variant "galerkin" needs the
    fixed viscosity nu (defaults to the trajectory's own).  The verdict is
    membership: every defining margin >= -tolerance * scale.
    """
    if variant not in _Y_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; pick one of {_Y_VARIANTS}")
    if R <= 0 or nu0 <= 0:
        raise ValueError("R and nu0 must be positive")
    if variant == "2d":
        if r is None or not (2 <= r < np.inf):
            raise ValueError("variant '2d' needs r in [2, inf)")
        if traj.grid.dim != 2:
            raise ValueError("variant '2d' needs a planar trajectory")
    if variant == "galerkin":
        nu = traj.cfg.nu if nu is None else nu
        if nu <= 0:
            raise ValueError("variant 'galerkin' needs nu > 0")
    data = _y_member_data(traj, f, variant, r, nu, probe_budget)
    tracks = _y_tracks(data, R, nu0, r, nu, c, traj.grid.lambda1)
    return BoundReport(f"y-membership-{variant}",
                       {"R": R, "nu0": nu0, "r": r, "nu": nu, "c": c},
                       tracks, tolerance)


@dataclass
class TightnessTable:
    """Empirical mass outside the R-indexed bound sets, per ensemble."""

    r_values: np.ndarray
    labels: list
    masses: np.ndarray  # (n_R, n_ensembles)

    @property
    def uniform(self) -> np.ndarray:
        """Column maxima: the uniform-tightness surrogate per R."""
        return self.masses.max(axis=1)

    def rows(self) -> list:
        out = []
        for i, rv in enumerate(self.r_values):
            out.append([float(rv)] + [float(x) for x in self.masses[i]]
                       + [float(self.uniform[i])])
        return out


def tightness_report(ensembles: Sequence[TrajectoryEnsemble],
                     r_ladder: Sequence[float], variant: str, f: Forcing,
                     nu0: float, r: Optional[float] = None,
                     nu: Optional[float] = None, c: float = 1.0,
                     labels: Optional[list] = None, probe_budget: int = 16,
                     tolerance: float = 1e-8) -> TightnessTable:
    """Total weight of members escaping each bound set: the empirical measure
    of the complement, tabulated over the R ladder (rows) and the ensemble
    family (columns).  Per-member resolved quantities are computed once and
    reused across the ladder."""
    if variant not in _Y_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    r_values = np.asarray(sorted(float(x) for x in r_ladder))
    masses = np.zeros((len(r_values), len(ensembles)))
    for e, rho in enumerate(ensembles):
        nu_e = nu if nu is not None else rho.members[0].cfg.nu
        lam = rho.grid.lambda1
        for member, w in zip(rho.members, rho.weights):
            data = _y_member_data(member, f, variant, r, nu_e, probe_budget)
            for i, rv in enumerate(r_values):
                tracks = _y_tracks(data, float(rv), nu0, r, nu_e, c, lam)
                ok = all(t.min_margin >= -tolerance * t.scale for t in tracks)
                if not ok:
                    masses[i, e] += w
    if labels is None:
        labels = [f"ensemble{j}" for j in range(len(ensembles))]
    return TightnessTable(r_values, list(labels), masses)


# ---------------------------------------------------------------------------
# Dissipative-solution comparison
# ---------------------------------------------------------------------------

def _d_minus_field(u: SpectralField) -> float:
    """Sup over the grid of the negative part of the smallest eigenvalue of
    the symmetric velocity gradient."""
    grads = _gradient_values(u)
    sym = 0.5 * (grads + np.swapaxes(grads, 0, 1))
    if u.grid.dim == 2:
        a, b, d = sym[0, 0], sym[0, 1], sym[1, 1]
        lmin = 0.5 * (a + d) - np.sqrt((0.5 * (a - d)) ** 2 + b * b)
    else:
        mat = np.moveaxis(sym, (0, 1), (-2, -1))
        lmin = np.linalg.eigvalsh(mat)[..., 0]
    return float(max(0.0, -float(np.min(lmin))))


def d_minus_linf(v: Trajectory, t: float) -> float:
    """Worst local compression rate of the comparison flow at time t."""
    return _d_minus_field(v.state_at(t))


def dissipative_check(u: Trajectory, v: Trajectory, f: Forcing,
                      viscous_slack_nu: Optional[float] = None,
                      tolerance: float = 1e-8) -> BoundReport:
    """Gronwall-type comparison of a path u against a smooth reference flow v:

        |u(t) - v(t)|^2 <= e^{2 int_t0^t D} |u(t0) - v(t0)|^2
                           + 2 int_t0^t e^{2 int_s^t D} (E(v) + f, u - v) ds

    with D(s) the sup-norm of the negative part of the smallest eigenvalue of
    the symmetric gradient of v, and E(v) = -dv/dt - P[(v.grad)v] the
    reference's momentum residual (time derivative by finite differences of
    the stored samples).

    A viscous path can only satisfy this inviscid inequality up to its own
    dissipation; passing viscous_slack_nu adds the comparison inequality's
    viscous term 2 nu int e^{2 int_s^t D} ||v|| ||u|| ds to the RHS (recorded
    in the track meta), which vanishes in the vanishing-viscosity limit.
    """
    if not np.array_equal(u.times, v.times):
        raise ValueError("u and v must share one time sampling")
    if u.grid.shape != v.grid.shape or u.grid.dim != v.grid.dim:
        raise ValueError("u and v must live on one grid")
    g = u.grid
    times = u.times
    n = u.n_samples

    dv = time_derivative(v)
    d_rate = np.array([_d_minus_field(v.state(j)) for j in range(n)])
    c_int = cumtrapz(d_rate, times)

    pair = np.empty(n)
    diff_sq = np.empty(n)
    grad_prod = np.empty(n)
    for j in range(n):
        diff = u.coeffs[j] - v.coeffs[j]
        diff_sq[j] = g.volume * float(np.sum(np.abs(diff) ** 2))
        ev = -dv[j] - nonlinear_term(v.state(j)).coeffs
        if not f.is_zero:
            ev = ev + f.eval(times[j])
        pair[j] = g.volume * float(np.sum(ev * np.conj(diff)).real)
        if viscous_slack_nu is not None:
            grad_prod[j] = norm_v(v.state(j)) * norm_v(u.state(j))

    weighted = np.exp(-2.0 * c_int) * pair
    inner = cumsimps(weighted, times)
    rhs = np.exp(2.0 * c_int) * (diff_sq[0] + 2.0 * inner)
    slack = np.zeros(n)
    if viscous_slack_nu is not None:
        slack = (2.0 * viscous_slack_nu * np.exp(2.0 * c_int)
                 * cumsimps(np.exp(-2.0 * c_int) * grad_prod, times))
        rhs = rhs + slack
    track = MarginTrack("dissipative", rhs - diff_sq, diff_sq, rhs,
                        meta={"times": times, "d_minus": d_rate,
                              "viscous_slack_nu": viscous_slack_nu,
                              "viscous_slack_max": float(np.max(slack))})
    return BoundReport("dissipative", {"t0": float(times[0]), "t1": float(times[-1]),
                                       "viscous_slack_nu": viscous_slack_nu},
                       [track], tolerance)


# ---------------------------------------------------------------------------
# Weak-star convergence surrogate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CylinderProbe:
    """Bounded-Lipschitz cylinder functional u -> phi(<u(t_1), g_1>, ...)."""

    times: tuple
    fields: tuple
    fn: Callable
    bound: float = 1.0
    lip: float = 1.0
    name: str = ""

    def __post_init__(self):
        if len(self.times) < 1 or len(self.times) != len(self.fields):
            raise ValueError("a probe needs k >= 1 instants with matching fields")


class ProbeFamily:
    """Finite family of normalized cylinder functionals.

    Probe fields are rescaled to unit H norm and each scalar map to
    sup |phi| <= 1, Lip(phi) <= 1, so the induced expectation gap is a
    pseudometric lower-bounding the bounded-Lipschitz distance on the
    sampled path space.  Enlarging the family never decreases distances.
    """

    def __init__(self, probes: Sequence[CylinderProbe]):
        probes = list(probes)
        if not probes:
            raise ValueError("empty probe family")
        grid = probes[0].fields[0].grid
        norm_probes = []
        for p in probes:
            fields = []
            for gfield in p.fields:
                if gfield.grid.shape != grid.shape:
                    raise ValueError("probe fields must share one grid")
                h = norm_h(gfield)
                fields.append(gfield * (1.0 / h) if h > 0 else gfield.copy())
            scale = max(1.0, p.bound, p.lip)
            norm_probes.append(CylinderProbe(
                tuple(p.times), tuple(fields),
                (lambda fn, s: (lambda x: fn(x) / s))(p.fn, scale),
                bound=min(1.0, p.bound / scale), lip=min(1.0, p.lip / scale),
                name=p.name))
        self.probes = norm_probes
        self.grid = grid

    def __len__(self) -> int:
        return len(self.probes)

    def evaluate(self, traj: Trajectory) -> np.ndarray:
        out = np.empty(len(self.probes))
        for i, p in enumerate(self.probes):
            x = np.array([inner_h(traj.state_at(t), gf)
                          for t, gf in zip(p.times, p.fields)])
            out[i] = float(p.fn(x))
        return out

    def expectations(self, rho: TrajectoryEnsemble) -> np.ndarray:
        vals = np.zeros(len(self.probes))
        for w, member in zip(rho.weights, rho.members):
            vals += w * self.evaluate(member)
        return vals


def wstar_distance(rho1: TrajectoryEnsemble, rho2: TrajectoryEnsemble,
                   probes: ProbeFamily) -> float:
    """Max over the family of |E_rho1[F] - E_rho2[F]|: a symmetric
    pseudometric satisfying the triangle inequality, monotone nondecreasing
    under family enlargement."""
    if rho1.grid.shape != rho2.grid.shape:
        raise ValueError("ensembles live on different grids")
    e1 = probes.expectations(rho1)
    e2 = probes.expectations(rho2)
    return float(np.max(np.abs(e1 - e2)))


def build_probe_family(grid, times: Sequence[float], count: int,
                       seed: int = 0) -> ProbeFamily:
    """Deterministic seeded family: low-shell single-mode probe fields paired
    with tanh / cos scalar maps of unit bound and Lipschitz constant."""
    if count < 1:
        raise ValueError("count must be >= 1")
    times = tuple(float(t) for t in times)
    k = len(times)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    modes = grid.canonical_modes()
    probes = []
    for i in range(count):
        n = modes[i % len(modes)]
        kvec = np.array([2.0 * np.pi * ni / grid.lengths[a] for a, ni in enumerate(n)])
        pols = _polarizations(kvec)
        e = pols[i % len(pols)]
        phase = rng.uniform(0, 2 * np.pi)
        amp = np.cos(phase) * e + 1j * np.sin(phase) * e
        gfield = single_mode_field(grid, n, amp)
        a = rng.normal(size=k)
        nrm = np.linalg.norm(a)
        a = a / nrm if nrm > 0 else np.full(k, 1.0 / np.sqrt(k))
        b = rng.uniform(-1.0, 1.0)
        if i % 2 == 0:
            fn = (lambda aa, bb: (lambda x: float(np.tanh(aa @ x + bb))))(a, b)
        else:
            fn = (lambda aa, bb: (lambda x: float(np.cos(aa @ x + bb))))(a, b)
        probes.append(CylinderProbe(times, (gfield,) * k, fn, bound=1.0, lip=1.0,
                                    name=f"probe{i}"))
    return ProbeFamily(probes)
