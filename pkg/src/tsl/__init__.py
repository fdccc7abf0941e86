"""Spectral ensemble simulator and inequality diagnostics for periodic
incompressible flow: a Fourier-Galerkin solver for the viscous equations and
their shell truncations, particle measures pushed through the solution
operators, and checkers for the a-priori bounds, compact-set memberships,
and weak-star convergence surrogates that govern their limits."""

from .dynamics import (BlowUpError, Forcing, SolverConfig, Trajectory,
                       energy_report, solve_galerkin, solve_nse_2d,
                       time_derivative, trajectory_from_states, weak_residual)
from .diagnostics import (CylinderProbe, ProbeFamily, TightnessTable,
                          build_probe_family, check_apriori_2d,
                          check_apriori_3d, check_galerkin_bounds,
                          check_y_membership, d_minus_linf, dissipative_check,
                          tightness_report, wstar_distance)
from .measures import (GaussianSpec, ParticleMeasure, TrajectoryEnsemble,
                       dirac_ensemble, project_measure, pushforward,
                       sample_gaussian, time_marginal)
from .reports import BoundReport, MarginTrack
from .scenarios import (ExperimentConfig, run_galerkin_3d, run_inviscid_2d,
                        run_inviscid_3d, run_scenario)
from .snapshots import (SnapshotFormatError, load_ensemble, load_field,
                        load_measure, load_snapshot, load_trajectory,
                        save_ensemble, save_field, save_measure,
                        save_trajectory)
from .spectral import (ScalarField, SpectralField, WaveGrid, abc_flow,
                       dual_w1inf_lower, field_from_values, field_values,
                       galerkin_mask, galerkin_project, inner_h, inner_v,
                       leray_project, lr_norm_scalar, make_grid,
                       nonlinear_term, norm_h, norm_v, norm_v_dual, norm_w1r,
                       random_solenoidal, shear_flow, shell_cutoff,
                       single_mode_field, taylor_green, validate_field,
                       vorticity_2d, zero_field)

__version__ = "0.1.0"
