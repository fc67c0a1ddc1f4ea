"""Immersed surfaces in Banach-Minkowski 3-space and Finsler metrics on planar charts.

The second fundamental form used here needs no inner product: it is the
Hessian of ``pi o f`` where ``pi`` is the projection onto the one-dimensional
quotient ``R^3 / Im df``. Representing the quotient by a Euclidean unit
conormal fixes the scalar ambiguity; only rank and determinant sign are
read off downstream.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .exceptions import DomainError, ImmersionError
from .norms import CustomNorm, fd_grad, fd_jacobian
from .planar import (EuclideanNorm2, LinearPullback, RestrictedNorm,
                     equivalence_defect, normalize)
from .tolerances import DEFAULTS

DEFINITE = "definite"
INDEFINITE = "indefinite"
DEGENERATE_RANK1 = "degenerate_rank1"
ZERO = "zero"

_J = np.array([[0.0, -1.0], [1.0, 0.0]])


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


# -- immersions ---------------------------------------------------------------

class Immersion3:
    """Smooth map from a planar chart into R^3 with derivative oracles.

    ``jac(x)`` is ``3 x 2``; ``hess(x)[a, i, j]`` is the second derivative of
    component ``a`` along ``e_i, e_j``; ``d3`` carries the third derivatives,
    which only the position Hessian of an induced metric needs.
    """

    family = "parametric"

    def __init__(self, func, jac=None, hess=None, d3=None, step=1e-4):
        self._func = func
        self._jac = jac
        self._hess = hess
        self._d3 = d3
        self.step = step

    def map(self, x):
        return np.asarray(self._func(np.asarray(x, dtype=float)), dtype=float)

    def jac(self, x):
        if self._jac is not None:
            return np.asarray(self._jac(np.asarray(x, dtype=float)), dtype=float)
        return fd_jacobian(self.map, x, self.step)

    def hess(self, x):
        if self._hess is not None:
            return np.asarray(self._hess(np.asarray(x, dtype=float)), dtype=float)
        return fd_jacobian(self.jac, x, self.step)

    def d3(self, x):
        if self._d3 is not None:
            return np.asarray(self._d3(np.asarray(x, dtype=float)), dtype=float)
        return fd_jacobian(self.hess, x, self.step)

    def spec(self):
        return {"family": self.family}


class GraphImmersion(Immersion3):
    """Graph ``(x, y, h(x, y))`` of a bivariate polynomial.

    ``coefficients`` maps exponent pairs ``(i, j)`` to the coefficient of
    ``x**i * y**j``.
    """

    family = "graph"

    def __init__(self, coefficients, name=None):
        coefficients = {tuple(map(int, k)): float(c) for k, c in dict(coefficients).items()}
        deg = max([i for i, _ in coefficients] + [j for _, j in coefficients] + [0])
        C = np.zeros((deg + 1, deg + 1))
        for (i, j), c in coefficients.items():
            if i < 0 or j < 0:
                raise DomainError("negative exponent in height polynomial")
            C[i, j] += c
        self.coefficients = coefficients
        self.name = name
        self._C = C
        self._derivs = {}

    def height_derivative(self, x, i, j):
        """``d^(i+j) h / dx^i dy^j`` at ``x``."""
        key = (i, j)
        if key not in self._derivs:
            self._derivs[key] = P.polyder(P.polyder(self._C, i, axis=0), j, axis=1)
        return float(P.polyval2d(x[0], x[1], self._derivs[key]))

    def height_hessian(self, x):
        x = np.asarray(x, dtype=float)
        hxy = self.height_derivative(x, 1, 1)
        return np.array([[self.height_derivative(x, 2, 0), hxy],
                         [hxy, self.height_derivative(x, 0, 2)]])

    def map(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([x[0], x[1], self.height_derivative(x, 0, 0)])

    def jac(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([[1.0, 0.0], [0.0, 1.0],
                         [self.height_derivative(x, 1, 0), self.height_derivative(x, 0, 1)]])

    def hess(self, x):
        out = np.zeros((3, 2, 2))
        out[2] = self.height_hessian(x)
        return out

    def d3(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros((3, 2, 2, 2))
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    e = (i == 0) + (j == 0) + (k == 0)
                    out[2, i, j, k] = self.height_derivative(x, e, 3 - e)
        return out

    def spec(self):
        if self.name is not None:
            return {"family": self.family, "name": self.name}
        return {"family": self.family,
                "coefficients": [[i, j, c] for (i, j), c in sorted(self.coefficients.items())]}


class ReparametrizedImmersion(Immersion3):
    """``x -> f(A x)`` for an invertible chart map ``A``."""

    family = "reparametrized"

    def __init__(self, f, A):
        self.base = f
        self.A = np.asarray(A, dtype=float)

    def map(self, x):
        return self.base.map(self.A @ np.asarray(x, dtype=float))

    def jac(self, x):
        return self.base.jac(self.A @ np.asarray(x, dtype=float)) @ self.A

    def hess(self, x):
        H = self.base.hess(self.A @ np.asarray(x, dtype=float))
        return np.einsum("akl,ki,lj->aij", H, self.A, self.A)

    def d3(self, x):
        D = self.base.d3(self.A @ np.asarray(x, dtype=float))
        return np.einsum("aklm,ki,lj,mn->aijn", D, self.A, self.A, self.A)

    def spec(self):
        return {"family": self.family, "base": self.base.spec(), "A": self.A.tolist()}


GRAPH_CATALOG = {
    "plane": {},
    "paraboloid": {(2, 0): 1.0, (0, 2): 1.0},
    "saddle": {(2, 0): 1.0, (0, 2): -1.0},
    "cylinder": {(2, 0): 1.0},
    "elliptic": {(2, 0): 1.0, (0, 2): 3.0, (1, 1): 1.0},
    "twisted": {(1, 1): 1.0},
    "tilted_cylinder": {(2, 0): 1.0, (1, 1): 2.0, (0, 2): 1.0},
    "monkey_saddle": {(3, 0): 1.0, (1, 2): -3.0},
    "cubic_cylinder": {(3, 0): 1.0},
    "quartic_bowl": {(4, 0): 1.0, (0, 4): 1.0, (2, 0): 0.5},
    "wavy": {(2, 0): 1.0, (0, 2): 0.5, (3, 0): 0.3, (1, 2): -0.2, (0, 4): 0.1},
}


def graph_surface(name):
    if name not in GRAPH_CATALOG:
        raise DomainError(f"unknown graph surface {name!r}; known: {sorted(GRAPH_CATALOG)}")
    return GraphImmersion(GRAPH_CATALOG[name], name=name)


def _checked_jac(f, x, rank_tol):
    J = f.jac(x)
    s = np.linalg.svd(J, compute_uv=False)
    if s[-1] <= rank_tol:
        raise ImmersionError(f"rank-deficient differential at x={np.asarray(x).tolist()}")
    return J


# -- second fundamental form ------------------------------------------------

@dataclass
class SFF2:
    matrix: np.ndarray
    conormal: np.ndarray
    eigenvalues: np.ndarray
    hess_norm: float

    def as_dict(self):
        return {"matrix": self.matrix.tolist(), "conormal": self.conormal.tolist(),
                "eigenvalues": self.eigenvalues.tolist(), "hess_norm": self.hess_norm}


def second_fundamental_form(f, p, rank_tol=None):
    rank_tol = DEFAULTS["immersion_rank"] if rank_tol is None else rank_tol
    J = _checked_jac(f, p, rank_tol)
    n = np.cross(J[:, 0], J[:, 1])
    n = n / np.linalg.norm(n)
    H = f.hess(p)
    S = np.einsum("a,aij->ij", n, H)
    S = 0.5 * (S + S.T)
    return SFF2(S, n, np.linalg.eigvalsh(S), float(np.linalg.norm(H)))


def classify_sff(s, scale_tol=None):
    """Four-way type of a second fundamental form from its eigenvalues.

    Thresholds are relative to the size of the full second derivative of
    the immersion, so the verdict does not depend on scaling the surface.
    """
    scale_tol = DEFAULTS["sff_scale"] if scale_tol is None else scale_tol
    if scale_tol <= 0:
        raise DomainError("scale_tol must be positive")
    mags = np.sort(np.abs(s.eigenvalues))[::-1]
    scale = s.hess_norm if s.hess_norm > 0 else mags[0]
    if mags[0] <= scale_tol * scale:
        return ZERO
    if mags[1] < scale_tol * mags[0]:
        return DEGENERATE_RANK1
    return DEFINITE if np.prod(s.eigenvalues) > 0 else INDEFINITE


# -- Finsler metrics on a chart ---------------------------------------------

class MetricOracle2:
    """Finsler metric ``phi(x, v)`` on a planar chart.

    ``dx``/``dv`` are gradients in position and velocity, ``dxx``/``dvv``
    the pure second derivatives and ``dxv[i, j] = d^2 phi / dx_i dv_j``.
    """

    family = "custom"
    x_translation_invariant = False

    def at(self, x):
        """The tangent norm ``v -> phi(x, v)`` as a planar norm."""
        raise NotImplementedError

    def eval(self, x, v):
        return self.at(x).value(v)

    def jet(self, x, v):
        """``(phi, dv, dx, dvv, dxv)`` at ``(x, v)``, broadcasting over leading axes."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        if v.ndim == 1 and x.ndim == 1:
            return (float(self.eval(x, v)), self.dv(x, v), self.dx(x, v),
                    self.dvv(x, v), self.dxv(x, v))
        xs, vs = np.broadcast_arrays(x, v)
        shape = xs.shape[:-1]
        parts = [self.jet(a, b) for a, b in zip(xs.reshape(-1, 2), vs.reshape(-1, 2))]
        return tuple(np.array([p[k] for p in parts]).reshape(shape + np.shape(parts[0][k]))
                     for k in range(5))


class FrozenMetric(MetricOracle2):
    """Position-independent metric ``phi(x, v) = pn(v)``."""

    family = "frozen"
    x_translation_invariant = True

    def __init__(self, pn):
        self.pn = pn

    def at(self, x):
        return self.pn

    def dv(self, x, v):
        return self.pn.grad(v)

    def dx(self, x, v):
        return np.zeros(2)

    def dxx(self, x, v):
        return np.zeros((2, 2))

    def dxv(self, x, v):
        return np.zeros((2, 2))

    def dvv(self, x, v):
        return self.pn.hess(v)

    def jet(self, x, v):
        v = np.asarray(v, dtype=float)
        if not hasattr(self.pn, "jet"):
            return super().jet(x, v)
        val, g, H = self.pn.jet(v)
        zero = np.zeros(np.broadcast_shapes(np.shape(x), v.shape) + (2,))
        return val, g, zero[..., 0], H, zero

    def spec(self):
        return {"family": self.family, "phi0": self.pn.spec()}


class RotationMetric(MetricOracle2):
    """``phi(x, y, v) = phi0(R^y v)`` with ``R^y`` the rotation by angle ``y``.

    Every tangent norm is a rotated copy of ``phi0``, so the metric is
    monochromatic; it does not depend on ``x``.
    """

    family = "rotation"
    x_translation_invariant = True

    def __init__(self, phi0):
        self.phi0 = phi0

    def at(self, x):
        return LinearPullback(self.phi0, rotation(x[1]))

    def _parts(self, x, v):
        R = rotation(x[1])
        u = R @ np.asarray(v, dtype=float)
        return R, u, _J @ u, self.phi0.grad(u), self.phi0.hess(u)

    def dv(self, x, v):
        R, u, ju, g, H = self._parts(x, v)
        return R.T @ g

    def dx(self, x, v):
        R, u, ju, g, H = self._parts(x, v)
        return np.array([0.0, g @ ju])

    def dxx(self, x, v):
        R, u, ju, g, H = self._parts(x, v)
        return np.array([[0.0, 0.0], [0.0, ju @ H @ ju - g @ u]])

    def dxv(self, x, v):
        R, u, ju, g, H = self._parts(x, v)
        return np.array([np.zeros(2), R.T @ (H @ ju + _J.T @ g)])

    def dvv(self, x, v):
        R, u, ju, g, H = self._parts(x, v)
        return R.T @ H @ R

    def jet(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        if not hasattr(self.phi0, "jet"):
            return super().jet(x, v)
        c, s = np.cos(x[..., 1]), np.sin(x[..., 1])
        R = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
        Rt = np.swapaxes(R, -1, -2)
        u = np.einsum("...ij,...j->...i", R, v)
        ju = np.stack([-u[..., 1], u[..., 0]], -1)
        val, g, H = self.phi0.jet(u)
        dv = np.einsum("...ij,...j->...i", Rt, g)
        dx = np.zeros(dv.shape)
        dx[..., 1] = np.einsum("...i,...i->...", g, ju)
        jtg = np.stack([g[..., 1], -g[..., 0]], -1)
        dxv = np.zeros(dv.shape + (2,))
        dxv[..., 1, :] = np.einsum("...ij,...j->...i", Rt,
                                   np.einsum("...ij,...j->...i", H, ju) + jtg)
        dvv = Rt @ H @ R
        return val, dv, dx, dvv, dxv

    def spec(self):
        return {"family": self.family, "phi0": self.phi0.spec()}


class InducedMetric(MetricOracle2):
    """``phi(x, v) = Phi(df_x v)``, the metric an immersion pulls back from the ambient norm."""

    family = "induced"

    def __init__(self, f, norm, rank_tol=None):
        self.f = f
        self.norm = norm
        self.rank_tol = DEFAULTS["immersion_rank"] if rank_tol is None else rank_tol

    def at(self, x):
        return RestrictedNorm(self.norm, basis=_checked_jac(self.f, x, self.rank_tol).T)

    def _parts(self, x, v):
        J = _checked_jac(self.f, x, self.rank_tol)
        v = np.asarray(v, dtype=float)
        w = J @ v
        Hf = self.f.hess(x)
        W = np.einsum("aij,j->ai", Hf, v)          # column i: d(J v)/dx_i
        return J, v, Hf, W, self.norm.grad(w), self.norm.hess(w)

    def dv(self, x, v):
        J, v, Hf, W, g, H = self._parts(x, v)
        return J.T @ g

    def dx(self, x, v):
        J, v, Hf, W, g, H = self._parts(x, v)
        return W.T @ g

    def dxx(self, x, v):
        J, v, Hf, W, g, H = self._parts(x, v)
        D = np.einsum("aikj,j->aik", self.f.d3(x), v)
        return W.T @ H @ W + np.einsum("a,aik->ik", g, D)

    def dxv(self, x, v):
        J, v, Hf, W, g, H = self._parts(x, v)
        return W.T @ H @ J + np.einsum("aij,a->ij", Hf, g)

    def dvv(self, x, v):
        J, v, Hf, W, g, H = self._parts(x, v)
        return J.T @ H @ J

    def spec(self):
        return {"family": self.family, "immersion": self.f.spec(), "norm": self.norm.spec()}


class CustomMetric(MetricOracle2):
    """Metric from a callable ``func(x, v)``; derivatives by central differences."""

    family = "custom"

    def __init__(self, func, step=1e-5, x_translation_invariant=False):
        self.func = func
        self.step = step
        self.x_translation_invariant = x_translation_invariant

    def at(self, x):
        x = np.asarray(x, dtype=float)
        return CustomNorm(lambda v: self.func(x, v), dim=2, step=self.step)

    def eval(self, x, v):
        return float(self.func(np.asarray(x, dtype=float), np.asarray(v, dtype=float)))

    def dv(self, x, v):
        return fd_grad(lambda w: self.eval(x, w), v, self.step)

    def dx(self, x, v):
        return fd_grad(lambda y: self.eval(y, v), x, self.step)

    def dxx(self, x, v):
        return fd_jacobian(lambda y: self.dx(y, v), x, self.step * 10)

    def dxv(self, x, v):
        return fd_jacobian(lambda w: self.dx(x, w), v, self.step * 10)

    def dvv(self, x, v):
        return fd_jacobian(lambda w: self.dv(x, w), v, self.step * 10)

    def spec(self):
        return {"family": self.family}


def induced_metric(f, norm):
    return InducedMetric(f, norm)


# -- diagnostics ------------------------------------------------------------

def monochromatic_defect(metric, points, n=512):
    """Largest equivalence defect between the tangent norm at ``points[0]`` and the others.

    Returns ``(max_defect, (0, k))`` where ``k`` attains the maximum.
    """
    if len(points) < 2:
        raise DomainError("at least two points are required")
    ref = metric.at(points[0])
    z0 = normalize(ref, n)
    best, arg = 0.0, (0, 0)
    for k, p in enumerate(points[1:], start=1):
        pn = metric.at(p)
        d = equivalence_defect(ref, pn, n, _normalized=(z0, normalize(pn, n))).defect
        if d > best or k == 1:
            best, arg = d, (0, k)
    return float(best), arg


def euclidean_defect(metric, p, n=512):
    return float(equivalence_defect(metric.at(p), EuclideanNorm2(), n).defect)


def flatness_defect(metric, p, n_dirs=64):
    """First- and second-order position derivatives of the metric at ``p``.

    Both vanish when ``phi(x, v)`` agrees with the frozen norm ``phi(p, v)``
    to second order in ``x - p`` in this chart, a sufficient condition for
    second-order flatness. Velocities run over the Euclidean unit circle.
    """
    if n_dirs < 16:
        raise DomainError("n_dirs must be at least 16")
    F1 = F2 = 0.0
    for t in 2 * np.pi * np.arange(n_dirs) / n_dirs:
        v = np.array([np.cos(t), np.sin(t)])
        F1 = max(F1, float(np.linalg.norm(metric.dx(p, v))))
        F2 = max(F2, float(np.linalg.norm(metric.dxx(p, v), 2)))
    return F1, F2


@dataclass
class MonoRecord:
    point: tuple
    mono_defect: float
    euclidean_defect: float
    sff_class: str


@dataclass
class MonoReport:
    records: list
    violations: list = field(default_factory=list)
    monochromatic: bool = False
    coincidences: list = field(default_factory=list)

    def as_dict(self):
        return {"records": [r.__dict__ for r in self.records], "violations": self.violations,
                "monochromatic": self.monochromatic, "coincidences": self.coincidences}


def _nonriemannian_nondegenerate(rec, tau_eq):
    return rec.euclidean_defect > 10 * tau_eq and rec.sff_class in (DEFINITE, INDEFINITE)


def mono_theorem_report(f, norm, points, n=512, tau_eq=None, scale_tol=None):
    """Per-point monochromatic defect, Euclidean defect and SFF class.

    The surface counts as monochromatic on the sample when every tangent
    norm is within ``tau_eq`` of the first one. Only then can a point whose
    tangent norm is non-Euclidean and whose second fundamental form is
    nondegenerate contradict the theorem; such points are the violations.
    Points that merely happen to carry a tangent norm isometric to the
    first one, on a surface that is not monochromatic, are listed under
    ``coincidences``.
    """
    if len(points) < 1:
        raise DomainError("at least one point is required")
    tau_eq = DEFAULTS["tau_eq"] if tau_eq is None else tau_eq
    metric = InducedMetric(f, norm)
    euclid = EuclideanNorm2()
    z_euclid = normalize(euclid, n)
    tangent = [metric.at(p) for p in points]
    normed = [normalize(t, n) for t in tangent]
    records = []
    for k, p in enumerate(points):
        mono = 0.0 if k == 0 else equivalence_defect(
            tangent[0], tangent[k], n, _normalized=(normed[0], normed[k])).defect
        eucl = equivalence_defect(tangent[k], euclid, n,
                                  _normalized=(normed[k], z_euclid)).defect
        cls = classify_sff(second_fundamental_form(f, p), scale_tol)
        records.append(MonoRecord(tuple(map(float, p)), float(mono), float(eucl), cls))
    monochromatic = all(r.mono_defect < tau_eq for r in records)
    flagged = [k for k, r in enumerate(records) if _nonriemannian_nondegenerate(r, tau_eq)]
    if monochromatic:
        return MonoReport(records, flagged, True, [])
    coincidences = [k for k in flagged if k > 0 and records[k].mono_defect < tau_eq]
    return MonoReport(records, [], False, coincidences)
