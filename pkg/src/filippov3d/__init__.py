"""Simulation and analysis of 3D piecewise-smooth (Filippov) systems.

The package is organized bottom-up:

core        fields, systems, switching-manifold classification, sliding
models      closed-form reference systems and their exact data
integrate   event-driven flights, half-return involutions, return maps
tsing       invisible two-fold detection and stability analysis
manifolds   invariant-manifold growth, cone circles, chain detection
horseshoe   region partition, patch/strips, covering certification
fixtures    synthetic systems with exactly known return maps
cli         batch pipelines emitting deterministic artifacts
"""

from .core import (Box, FoldClass, PiecewiseSystem, RegionLabel, ScalarField,
                   SmoothField, classify_fold_fold, classify_sigma_point,
                   evaluate_filippov, lie_derivative, normalized_sliding_field,
                   sliding_field)
from .integrate import (EventIntegratorConfig, ReturnMapHandle, SectionPlane,
                        flow_to_sigma, half_return, jacobian_2d,
                        return_map_eval, section_map)
from .manifolds import (ChainClassification, CircleTrace, ManifoldCurve,
                        check_tc_r, classify_chain, find_homoclinic_points,
                        grow_manifold, propagate_circle, trace_cone_circle)
from .models import (cone_intersection_point, cone_parametrization,
                     cone_section_curves, model_eigen_data, model_involution,
                     model_return_map, model_system, regularization_blend)
from .tsing import (TSingularityReport, analyze_t_singularity,
                    find_t_singularities, sample_diabolo)
from .horseshoe import (HorseshoeCertificate, build_q_patch,
                        build_region_partition, certify_fixture_pipeline,
                        certify_horseshoe, iterate_patch,
                        orbit_crossing_audit, symbolic_periodic_point)
from .fixtures import fixture_handle, fixture_system, model_handle

__version__ = "0.1.0"
