"""Finite/fixed-time homogeneous control: synthesis, consistent
sampled-data discretization, certification and simulation for linear
plants."""

from .dilation import (DilationSpec, NormBounds, check_monotone, dilation_at,
                       hom_norm, hom_norm_gradient, norm_bounds)
from .discretization import (CertificateReport, RadiiReport, SampledScheme,
                             build_scheme, certify, compute_radii,
                             consistent_control, consistent_gain,
                             full_control_sequence, q_matrix, step_map, theta)
from .errors import (ConfigError, ControllabilityError, DimensionError,
                     HomctlError, LmiInfeasibleError, NonMonotoneDilationError,
                     NotPositiveDefiniteError, SchemeError, StructureError,
                     SynthesisError)
from .matrixkit import (discretize_pair, expm, is_pd, mat_from_json,
                        mat_to_json, sqrtm_pd, sym_eig, weighted_opnorm)
from .mimo import (CascadeDesign, CascadeSkeleton, cascade_consistent_control,
                   cascade_design, cascade_full_sequence, cascade_schemes,
                   decompose)
from .simulator import (IssRow, PerturbationSpec, SimConfig, Trajectory,
                        chattering_index, iss_sweep, settling_time, simulate,
                        write_trajectory)
from .synthesis import (ControllerDesign, build_controller,
                        controllability_index, design_from_solution,
                        design_residuals, eval_control,
                        lyapunov_decay_residual, make_Gd, solve_G0_Y0,
                        solve_gain_lmi, validate_design)

__version__ = "0.1.0"
