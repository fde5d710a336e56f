"""Implicit solver and Orlicz-space diagnostics for damped elastodynamics."""

from .nfunction import (NFunctionSpec, UnsupportedSpecError, MaximizationError,
                        young_gap, delta2_check, growth_constant_estimate,
                        monotonicity_probe, axiom_samples)
from .orlicz import (CellField, modular, luxemburg_norm, holder_check,
                     norm_modular_relations, cell_field_to_csv)
from .space import (SpaceHandle, P1IntervalSpace, P1SquareSpace, SineSpectralSpace,
                    build_space, Field, gradient_per_cell, sampled_gradient,
                    nonlinear_residual, nonlinear_jacobian, discrete_potential,
                    l2_project, l2_norm, h1_seminorm, l2_error, hr_dual_norm,
                    field_to_csv, grid_dump)
from .stepper import (SchemeConfig, SchemeState, SourceSampler, StepRecord,
                      RunReport, NewtonError, average_source, step, run,
                      second_order_residual)
from .monitors import (energy, check_dissipation, check_energy_estimate,
                       dual_increment_sum, calibrate_dual_bound, coupling_sequence,
                       DissipationResult, EnergyEstimateResult, DualIncrementResult)
from .harness import (ManufacturedCase, CaseConsistencyError, get_case,
                      case_names, make_case, verify_consistency, initial_fields,
                      temporal_convergence, spatial_convergence, rate_fit,
                      uniqueness_probe, projection_floor, ConvergenceEntry,
                      ConvergenceStudy, ProbeResult)

__version__ = "0.1.0"
