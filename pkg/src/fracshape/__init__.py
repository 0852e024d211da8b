"""Numerical laboratory for spectral shape optimization under the
fractional Dirichlet Laplacian on a uniform cell grid."""

__version__ = "0.1.0"

from .errors import (BudgetError, DomainEmptyError, FracshapeError,
                     NumericError, ParameterError, StructuralError)
from .grid import (DomainMask, Grid, GridFunction, build_grid, empty_mask,
                   full_mask, mask_from_indices, translate_mask)
from .forms import (StiffnessOperator, assemble_stiffness, fourier_seminorm_sq,
                    gagliardo_sq, make_frac_params, normalization_constant,
                    weighted_gagliardo_sq)
from .solvers import (DirichletOperator, Spectrum, TorsionFunction,
                      apply_resolvent, capacity_estimate, eigenpairs,
                      poincare_constant, resolvent_norm_diff, restrict,
                      solve_torsion, torsion_resolvent_bound_check)
from .concentration import (FunctionSequence, SplitPair, TrichotomyReport,
                            classify, concentration_profile, cutoff_defect,
                            dichotomy_split, flattening_bump_sequence,
                            lieb_translation_search, make_cutoffs,
                            make_sequence, separating_pair_sequence,
                            translating_bump_sequence)
from .shapeopt import (AnnealingSchedule, DichotomyReport, FunctionalSpec,
                       ShapeTrajectory, ball_mask, connected_components,
                       detect_dichotomy, eval_functional, gamma_distance,
                       make_functional, minimize_shape, trajectory_from_masks,
                       two_ball_experiment, volume_semicontinuity_check)
from .audit import CheckResult, bounds_audit, check_names
