"""Wasserstein-Fisher-Rao transport splines on the mass-position cone."""
from .cone import (ConePath, ConePoint, ConeTangent, cone_distance, cone_inner,
                   covariant_acceleration, geodesic_eval, geodesic_path, path_curvature_cost)
from .cubic import CubicFit, KnotSeries, cubic_eval, natural_cubic_fit
from .decasteljau import (ConeSplineSegment, KnotVelocity, control_points, decasteljau_eval,
                          endpoint_velocities, feasible_rescale, geodesic_midop)
from .measures import (DiscreteMeasure, LiftedMeasure, canonical_lift, gaussian_bump,
                       project_lift, subsample_support, total_mass)
from .pipeline import (MeasureCurve, ParticleTrajectory, SolverConfig, TrajectorySet,
                       assemble_spline, build_trajectories, curve_curvature_report,
                       estimate_knot_velocities, sample_curve)
from .uot import (CostMatrix, DensityRatio, TransportPlan, barycentric_map, cost_matrix,
                  density_ratio, map_extend, solve_entropic, wfr_distance)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
