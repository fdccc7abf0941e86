"""Particle representations of probability measures on phase space and path
space: weighted Dirac combinations, Gaussian sampling, shell projection,
push-forward through a solution operator, and time marginals.

Measures are carried entirely by finite particle systems; continuous
measures enter only through sampling.  Ensembles are immutable after
construction and atom-wise operations never depend on atom order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import BlowUpError, Forcing, SolverConfig, Trajectory
from .spectral import (SpectralField, WaveGrid, _leray_coeffs, _reflect,
                       galerkin_project)

_WEIGHT_TOL = 1e-12


def worker_count() -> int:
    """Worker cap from TSL_THREADS (default 1: fully sequential)."""
    try:
        return max(1, int(os.environ.get("TSL_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn: Callable, items: Sequence):
    """Order-preserving map, threaded when TSL_THREADS > 1."""
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass
class ParticleMeasure:
    """Weighted Dirac combination on phase space; weights sum to 1."""

    atoms: list
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.atoms) == 0:
            raise ValueError("a particle measure needs at least one atom")
        if self.weights.shape != (len(self.atoms),):
            raise ValueError("one weight per atom required")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        grid = self.atoms[0].grid
        if any(a.grid is not grid and a.grid.shape != grid.shape for a in self.atoms):
            raise ValueError("all atoms must live on one grid")
        total = float(self.weights.sum())
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError("weights must sum to 1 (use dirac_ensemble to normalize)")

    @property
    def grid(self) -> WaveGrid:
        return self.atoms[0].grid

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def expectation(self, fn: Callable[[SpectralField], float]) -> float:
        return float(sum(w * fn(a) for w, a in zip(self.weights, self.atoms)))


@dataclass
class TrajectoryEnsemble:
    """Weighted Dirac combination on path space, on a common time sampling."""

    members: list
    weights: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.members) == 0:
            raise ValueError("an ensemble needs at least one member")
        if self.weights.shape != (len(self.members),):
            raise ValueError("one weight per member required")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if abs(float(self.weights.sum()) - 1.0) > _WEIGHT_TOL:
            raise ValueError("weights must sum to 1")
        t0 = self.members[0].times
        for m in self.members[1:]:
            if not np.array_equal(m.times, t0):
                raise ValueError("ensemble members must share one time sampling")

    @property
    def grid(self) -> WaveGrid:
        return self.members[0].grid

    @property
    def times(self) -> np.ndarray:
        return self.members[0].times

    @property
    def n_members(self) -> int:
        return len(self.members)

    def expectation(self, fn: Callable[[Trajectory], float]) -> float:
        return float(sum(w * fn(m) for w, m in zip(self.weights, self.members)))


@dataclass
class GaussianSpec:
    """Gaussian on phase space: a mean field plus independent per-mode complex
    deviations on a declared low-mode set (zero outside).

    sigma[n] is the per-component standard deviation of the complex amplitude
    drawn at lattice point n before projection; the table must be symmetric
    under negation (one free draw per conjugate pair) and zero at the origin
    and Nyquist frequencies.
    """

    mean: SpectralField
    sigma: np.ndarray

    def __post_init__(self):
        grid = self.mean.grid
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if self.sigma.shape != grid.shape:
            raise ValueError("sigma table must have one entry per lattice point")
        if np.any(self.sigma < 0):
            raise ValueError("deviations must be nonnegative")
        if np.max(np.abs(self.sigma - _reflect(grid, self.sigma))) > 0:
            raise ValueError("sigma table must respect Hermitian pairing")
        if self.sigma[(0,) * grid.dim] != 0 or np.any(self.sigma[grid.nyquist_mask] != 0):
            raise ValueError("sigma must vanish at the origin and Nyquist modes")

    @classmethod
    def isotropic(cls, mean: SpectralField, sigma: float, max_k2: float) -> "GaussianSpec":
        """Uniform deviation sigma on all modes with 0 < |k|^2 <= max_k2."""
        grid = mean.grid
        table = np.where((grid.k2 > 0) & (grid.k2 <= max_k2 + 1e-9), float(sigma), 0.0)
        table[grid.nyquist_mask] = 0.0
        return cls(mean, table)

    def active_modes(self) -> list:
        return [n for n in self.mean.grid.canonical_modes()
                if self.sigma[self.mean.grid.mode_index(n)] > 0]


def dirac_ensemble(fields: Sequence[SpectralField], weights) -> ParticleMeasure:
    """Normalized weighted Dirac combination of the given fields."""
    weights = np.asarray(weights, dtype=np.float64)
    if len(fields) == 0:
        raise ValueError("need at least one field")
    if weights.shape != (len(fields),):
        raise ValueError("weights and fields must have matching lengths")
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    return ParticleMeasure([f.copy() for f in fields], weights / weights.sum())


def sample_gaussian(spec: GaussianSpec, n: int, seed: int) -> ParticleMeasure:
    """n equal-weight atoms mean + noise, Leray-projected, reproducible per seed.

    Each atom draws from its own counter-based stream keyed (seed, atom), with
    the active modes filled in canonical lattice order, so sampling is
    order-independent across atoms.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    grid = spec.mean.grid
    modes = spec.active_modes()
    atoms = []
    for a in range(n):
        if not modes:
            atoms.append(spec.mean.copy())
            continue
        rng = np.random.Generator(np.random.Philox(key=[np.uint64(seed), np.uint64(a)]))
        z = rng.normal(size=(2, len(modes), grid.dim))
        c = spec.mean.coeffs.copy()
        for j, mode in enumerate(modes):
            idx = grid.mode_index(mode)
            s = spec.sigma[idx] / np.sqrt(2.0)
            xi = s * (z[0, j] + 1j * z[1, j])
            c[(slice(None),) + idx] += xi
            c[(slice(None),) + grid.mode_index([-v for v in mode])] += np.conj(xi)
        atoms.append(SpectralField(grid, _leray_coeffs(grid, c)))
    return ParticleMeasure(atoms, np.full(n, 1.0 / n))


def project_measure(mu: ParticleMeasure, m: int) -> ParticleMeasure:
    """Atom-wise shell projection; weights unchanged; idempotent."""
    return ParticleMeasure([galerkin_project(a, m) for a in mu.atoms],
                           mu.weights.copy())


def pushforward(solver: Callable[[SpectralField, Forcing, SolverConfig], Trajectory],
                mu: ParticleMeasure, f: Forcing, cfg: SolverConfig,
                provenance: Optional[dict] = None) -> TrajectoryEnsemble:
    """Image of mu under the solution operator: member i = solver(atom i),
    weights carried over.  Solver blow-up is re-raised tagged with the atom
    index."""

    def run(item):
        i, atom = item
        try:
            return solver(atom, f, cfg)
        except BlowUpError as err:
            raise BlowUpError(err.step, err.time, atom=i) from err

    members = _pmap(run, list(enumerate(mu.atoms)))
    prov = {"solver": getattr(solver, "__name__", str(solver)), "nu": cfg.nu,
            "m": cfg.m, "t0": cfg.t0, "t1": cfg.t1, "dt": cfg.dt,
            "sample_stride": cfg.sample_stride}
    if provenance:
        prov.update(provenance)
    return TrajectoryEnsemble(members, mu.weights.copy(), prov)


def time_marginal(rho: TrajectoryEnsemble, t: float) -> ParticleMeasure:
    """Distribution of states at time t (nearest stored sample), weights kept."""
    idx = rho.members[0].index_at(t)
    return ParticleMeasure([m.state(idx).copy() for m in rho.members],
                           rho.weights.copy())
