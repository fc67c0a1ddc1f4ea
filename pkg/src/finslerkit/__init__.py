"""Numerical toolkit for cross-sections of convex bodies, surfaces in
Banach-Minkowski space and monochromatic Finsler metrics."""

__version__ = "0.1.0"

from .exceptions import (ConvergenceError, DegeneracyError, DomainError, EvaluationError,
                         FinslerkitError, ImmersionError)
from .geodesics import (GeodesicTrajectory, euclidean_arc_defect, geodesic_rhs,
                        horizontal_residual, integrate_geodesic, integrate_geodesics,
                        rotation_metric)
from .norms import (CustomNorm, EllipsoidNorm, Plane3, RandersNorm, Sum2Norm,
                    check_banach_minkowski, opposite_unit_vector, plane_from_alpha,
                    plane_from_normal, sample_plane_neighborhood, unit_vector)
from .planar import (CircumscribedEllipse, EuclideanNorm2, PaperPhi0, Randers2,
                     ScaledEllipseNorm, Sum2Planar, ellipse_defect, equivalence_defect,
                     exact_equivalence_defect, min_circumscribed_ellipse, normalize,
                     radial_profile, restrict_norm, self_rotation_defect)
from .sections import (QuadraticNormRegressor, amu_scan, kakutani_tau, local_ellipsoid_check,
                       quadratic_fit, scan_planes, validation_residual)
from .surfaces import (GRAPH_CATALOG, CustomMetric, FrozenMetric, GraphImmersion, Immersion3,
                       InducedMetric, RotationMetric, classify_sff, euclidean_defect,
                       flatness_defect, graph_surface, induced_metric, monochromatic_defect,
                       mono_theorem_report, second_fundamental_form)
