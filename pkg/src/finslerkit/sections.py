"""Cross-section experiments: neighbourhood equivalence scans, tangent-vector
feasibility and the quadratic-form extension fit."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DomainError
from .norms import plane_from_alpha, sample_plane_neighborhood
from .planar import (TWO_PI, circle, ellipse_defect, equivalence_defect, normalize,
                     restrict_norm)
from .tolerances import DEFAULTS
from .validation import check_points

CONSISTENT = "consistent_with_ellipsoid"
EQUIVALENCE_FAILS = "equivalence_fails"
ELLIPSE_FAILS = "ellipse_fails"


def _map(func, items, n_jobs):
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


@dataclass
class ScanReport:
    planes: list
    defect_matrix: np.ndarray
    max_defect: float
    ellipse_defects: np.ndarray
    verdict: str
    pairwise: bool = False
    tau_eq: float = DEFAULTS["tau_eq"]

    def rows(self):
        """``(a, b, defect_to_center, ellipse_defect)`` per plane."""
        d0 = self.defect_matrix[0] if self.pairwise else self.defect_matrix
        return [(p.alpha[0], p.alpha[1], float(d), float(e))
                for p, d, e in zip(self.planes, d0, self.ellipse_defects)]

    def as_dict(self):
        return {
            "alphas": [list(p.alpha) for p in self.planes],
            "defect_matrix": np.asarray(self.defect_matrix).tolist(),
            "max_defect": float(self.max_defect),
            "ellipse_defects": np.asarray(self.ellipse_defects).tolist(),
            "verdict": self.verdict,
            "pairwise": self.pairwise,
            "tau_eq": self.tau_eq,
        }


def _verdict(max_defect, ellipse_defects, tau_eq):
    if max_defect >= tau_eq:
        return EQUIVALENCE_FAILS
    if np.max(ellipse_defects) >= tau_eq:
        return ELLIPSE_FAILS
    return CONSISTENT


def scan_planes(norm, planes, n=512, pairwise=False, tau_eq=None, n_jobs=None):
    """Equivalence and ellipse defects of the sections of ``norm`` by ``planes``.

    Without ``pairwise`` every section is compared to the first one only.
    """
    tau_eq = DEFAULTS["tau_eq"] if tau_eq is None else tau_eq
    sections = [restrict_norm(norm, p) for p in planes]
    normed = _map(lambda s: normalize(s, n), sections, n_jobs)
    ell = np.array([ellipse_defect(s, n, _normalized=z) for s, z in zip(sections, normed)])

    def defect(ij):
        i, j = ij
        if i == j:
            return 0.0
        return equivalence_defect(sections[i], sections[j], n,
                                  _normalized=(normed[i], normed[j])).defect

    m = len(planes)
    if pairwise:
        pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
        vals = _map(defect, pairs, n_jobs)
        D = np.zeros((m, m))
        for (i, j), v in zip(pairs, vals):
            D[i, j] = D[j, i] = v
    else:
        D = np.array(_map(defect, [(0, j) for j in range(m)], n_jobs))
    max_defect = float(D.max())
    return ScanReport(list(planes), D, max_defect, ell,
                      _verdict(max_defect, ell, tau_eq), pairwise, tau_eq)


def amu_scan(norm, center=(0.0, 0.0), radius=0.3, count=20, n=512, seed=0,
             pairwise=False, tau_eq=None, n_jobs=None):
    """Sample a chart neighbourhood of planes and compare their sections.

    A body whose sections near a plane are all linearly equivalent must be
    an ellipsoid there, so an ellipsoid returns ``consistent_with_ellipsoid``
    and any other body should fail one of the two stages.
    """
    if count < 5:
        raise DomainError("count must be at least 5")
    planes = sample_plane_neighborhood(center, radius, count, seed)
    return scan_planes(norm, planes, n, pairwise, tau_eq, n_jobs)


@dataclass
class TauResult:
    tau: np.ndarray
    sigma_ratio: float
    feasible: bool
    max_row_residual: float = 0.0

    def as_dict(self):
        return {"tau": self.tau.tolist(), "sigma_ratio": float(self.sigma_ratio),
                "feasible": bool(self.feasible),
                "max_row_residual": float(self.max_row_residual)}


def section_unit_vectors(norm, plane, m, offset=0.0):
    """``m`` points of the unit sphere on the plane, at uniform angles in its basis."""
    theta = offset + TWO_PI * np.arange(m) / m
    v = circle(theta) @ plane.basis
    return v / norm.value(v)[:, None]


def kakutani_tau(norm, plane, m=32, tau_tau=None):
    """Look for a vector tangent to the unit sphere along a whole central section.

    The gradients of the norm at ``m`` section points form an ``m x 3``
    matrix; a common tangent vector is a null vector of it. ``sigma_ratio``
    is the ratio of its extreme singular values and the right singular
    vector of the smallest one is returned, oriented to pair positively with
    the plane's conormal.
    """
    if m < 8:
        raise DomainError("m must be at least 8")
    plane.check_basis()
    tau_tau = DEFAULTS["tau_tau"] if tau_tau is None else tau_tau
    rows = norm.grad(section_unit_vectors(norm, plane, m))
    _, s, Vt = np.linalg.svd(rows)
    tau = Vt[-1]
    if tau @ plane.conormal < 0:
        tau = -tau
    ratio = float(s[-1] / s[0])
    return TauResult(tau, ratio, ratio < tau_tau, float(np.abs(rows @ tau).max()))


def _quad_features(V):
    x, y, z = V[:, 0], V[:, 1], V[:, 2]
    return np.column_stack([x * x, y * y, z * z, 2 * x * y, 2 * x * z, 2 * y * z])


def _quad_matrix(c):
    return np.array([[c[0], c[3], c[4]], [c[3], c[1], c[5]], [c[4], c[5], c[2]]])


class QuadraticNormRegressor(RegressorMixin, BaseEstimator):
    """Least-squares quadratic form ``v' Q v`` fitted to squared norm values.

    ``fit(X, y)`` takes vectors in R^3 as rows of ``X`` and targets
    ``y = Phi(X)^2``. The minimum-norm solution is returned when the samples
    do not determine all six entries; ``rank_`` then falls below 6.
    """

    def __init__(self, rcond=1e-10):
        self.rcond = rcond

    def fit(self, X, y):
        X = check_points(X, 3)
        y = np.asarray(y, dtype=float)
        coef, _, rank, _ = np.linalg.lstsq(_quad_features(X), y, rcond=self.rcond)
        self.coef_ = coef
        self.Q_ = _quad_matrix(coef)
        self.rank_ = int(rank)
        return self

    def predict(self, X):
        check_is_fitted(self, "Q_")
        X = np.asarray(X, dtype=float)
        return np.einsum("...i,ij,...j->...", X, self.Q_, X)


@dataclass
class QuadraticFit:
    Q: np.ndarray
    residual: float
    positive_definite: bool
    rank_deficient: bool = False

    def as_dict(self):
        return {"Q": self.Q.tolist(), "residual": float(self.residual),
                "positive_definite": bool(self.positive_definite),
                "rank_deficient": bool(self.rank_deficient)}


def quadratic_fit(norm, planes, per_plane_samples=16):
    """Fit one quadratic form to ``Phi^2`` on the unit circles of all listed planes.

    Three distinct planes determine a quadratic form; with two the form is
    only fixed up to the product of their conormals and ``rank_deficient``
    is set.
    """
    if len(planes) < 2:
        raise DomainError("at least two planes are required")
    if per_plane_samples < 6:
        raise DomainError("per_plane_samples must be at least 6")
    V = np.concatenate([section_unit_vectors(norm, p, per_plane_samples) for p in planes])
    y = norm.value(V) ** 2
    reg = QuadraticNormRegressor().fit(V, y)
    residual = float(np.abs(reg.predict(V) - y).max())
    pd = bool(np.linalg.eigvalsh(reg.Q_)[0] > 0)
    return QuadraticFit(reg.Q_, residual, pd, reg.rank_ < 6)


def validation_residual(norm, Q, planes, per_plane_samples=64):
    """``max |Phi(v)^2 - v'Qv|`` on fresh unit-circle samples of the planes."""
    V = np.concatenate([section_unit_vectors(norm, p, per_plane_samples,
                                             offset=np.pi / per_plane_samples)
                        for p in planes])
    return float(np.abs(norm.value(V) ** 2 - np.einsum("ki,ij,kj->k", V, Q, V)).max())


@dataclass
class LocalEllipsoidVerdict:
    verdict: str
    failing_stage: str = None
    scan: ScanReport = None
    fit: QuadraticFit = None
    validation_residual: float = None
    extras: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "verdict": self.verdict,
            "failing_stage": self.failing_stage,
            "scan": self.scan.as_dict() if self.scan else None,
            "fit": self.fit.as_dict() if self.fit else None,
            "validation_residual": self.validation_residual,
        }


def local_ellipsoid_check(norm, center=(0.0, 0.0), radius=0.3, count=20, n=512, seed=0,
                          per_plane_samples=16, tau_eq=None, n_jobs=None):
    """Scan, then fit and validate a quadratic form when the scan is consistent."""
    tau_eq = DEFAULTS["tau_eq"] if tau_eq is None else tau_eq
    scan = amu_scan(norm, center, radius, count, n, seed, tau_eq=tau_eq, n_jobs=n_jobs)
    if scan.verdict == EQUIVALENCE_FAILS:
        return LocalEllipsoidVerdict("not_ellipsoid", "equivalence", scan)
    if scan.verdict == ELLIPSE_FAILS:
        return LocalEllipsoidVerdict("not_ellipsoid", "ellipse", scan)
    fit = quadratic_fit(norm, scan.planes, per_plane_samples)
    res = validation_residual(norm, fit.Q, scan.planes)
    if res >= tau_eq or not fit.positive_definite:
        return LocalEllipsoidVerdict("not_ellipsoid", "quadratic_fit", scan, fit, res)
    return LocalEllipsoidVerdict("ellipsoid_locally", None, scan, fit, res)


def planes_from_alphas(alphas):
    return [plane_from_alpha(a, b) for a, b in alphas]
