"""Planar norms, circumscribed-ellipse normalization and linear-equivalence defects.

Two planar norms are linearly equivalent when some invertible linear map
carries one unit ball onto the other. Every comparison here first moves each
unit ball into a canonical position, the one whose minimum-area centered
circumscribed ellipse is the unit disk. That position is unique up to
``O(2)``, so the remaining search is over rotations and one reflection.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar, nnls
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConvergenceError, DomainError, EvaluationError
from .norms import RootSumNorm
from .tolerances import DEFAULTS
from .validation import as_spd, as_vector, check_points

TWO_PI = 2.0 * np.pi


# -- planar norm families ----------------------------------------------------

class EuclideanNorm2(RootSumNorm):
    family = "euclidean"
    source = "standalone"

    def __init__(self):
        super().__init__([np.eye(2)])

    def spec(self):
        return {"family": self.family}


class ScaledEllipseNorm(RootSumNorm):
    """``sqrt(w' M w)``."""

    family = "scaled_ellipse"
    source = "standalone"

    def __init__(self, M):
        self.M = as_spd(M, 2, name="M")
        super().__init__([self.M])

    def spec(self):
        return {"family": self.family, "M": self.M.tolist()}


class PaperPhi0(RootSumNorm):
    """``sqrt(xi^2 + eta^2) + sqrt(xi^2 + 2 eta^2)``, a smooth non-Euclidean norm."""

    family = "paper_phi0"
    source = "standalone"

    def __init__(self):
        super().__init__([np.eye(2), np.diag([1.0, 2.0])])

    def spec(self):
        return {"family": self.family}


class Randers2(RootSumNorm):
    family = "randers2"
    source = "standalone"

    def __init__(self, M, b):
        self.M = as_spd(M, 2, name="M")
        self.b = as_vector(b, 2, name="b")
        super().__init__([self.M], self.b)

    def spec(self):
        return {"family": self.family, "M": self.M.tolist(), "b": self.b.tolist()}


class Sum2Planar(RootSumNorm):
    family = "sum2"
    source = "standalone"

    def __init__(self, M1, M2):
        self.M1 = as_spd(M1, 2, name="M1")
        self.M2 = as_spd(M2, 2, name="M2")
        super().__init__([self.M1, self.M2])

    def spec(self):
        return {"family": self.family, "M1": self.M1.tolist(), "M2": self.M2.tolist()}


class RestrictedNorm:
    """A 3D norm pulled back along a linear map ``R^2 -> R^3``.

    With a plane this is the restriction of the norm to it, in the plane's
    stored basis; ``basis`` may instead be given directly as a ``2 x 3``
    array whose rows are the images of e1 and e2.
    """

    family = "restriction"
    source = "restriction"
    dim = 2

    def __init__(self, norm, plane=None, basis=None):
        self.norm = norm
        self.plane = plane
        self._B = np.asarray(plane.basis if basis is None else basis, dtype=float)

    def __call__(self, w):
        return self.value(w)

    def value(self, w):
        return self.norm.value(np.asarray(w, dtype=float) @ self._B)

    def grad(self, w):
        return self.norm.grad(np.asarray(w, dtype=float) @ self._B) @ self._B.T

    def hess(self, w):
        H = self.norm.hess(np.asarray(w, dtype=float) @ self._B)
        return self._B @ H @ self._B.T

    def spec(self):
        out = {"family": self.family, "norm": self.norm.spec()}
        if self.plane is not None:
            out["alpha"] = list(self.plane.alpha)
        else:
            out["basis"] = self._B.tolist()
        return out


class LinearPullback:
    """``w -> pn(A w)`` for an invertible ``A``; its unit ball is ``A^{-1}`` of pn's."""

    family = "pullback"
    dim = 2

    def __init__(self, pn, A):
        self.base = pn
        self.A = np.asarray(A, dtype=float)
        self.source = getattr(pn, "source", "standalone")

    def __call__(self, w):
        return self.value(w)

    def value(self, w):
        return self.base.value(np.asarray(w, dtype=float) @ self.A.T)

    def grad(self, w):
        return self.base.grad(np.asarray(w, dtype=float) @ self.A.T) @ self.A

    def hess(self, w):
        return self.A.T @ self.base.hess(np.asarray(w, dtype=float) @ self.A.T) @ self.A

    def spec(self):
        return {"family": self.family, "base": self.base.spec(), "A": self.A.tolist()}


def restrict_norm(norm, plane):
    return RestrictedNorm(norm, plane)


def compose(pn, A):
    """``pn o A``."""
    return LinearPullback(pn, A)


def circle(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _checked_values(pn, u):
    vals = np.asarray(pn.value(u), dtype=float)
    bad = ~np.isfinite(vals) | (vals <= 0)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise EvaluationError(f"norm value {vals[k]} at direction {u[k].tolist()}")
    return vals


# -- radial profiles ---------------------------------------------------------

@dataclass
class RadialProfile:
    """Radii of the unit circle at ``n`` equally spaced angles."""

    n: int
    r: np.ndarray

    @property
    def theta(self):
        return TWO_PI * np.arange(self.n) / self.n

    def points(self):
        return self.r[:, None] * circle(self.theta)

    def edge_turns(self):
        """Cross products of consecutive edges of the boundary polygon."""
        p = self.points()
        e = np.roll(p, -1, axis=0) - p
        e_next = np.roll(e, -1, axis=0)
        return e[:, 0] * e_next[:, 1] - e[:, 1] * e_next[:, 0]

    def is_convex(self):
        turns = self.edge_turns()
        return bool(np.all(turns > 0) or np.all(turns < 0))

    def rows(self):
        return list(zip(self.theta.tolist(), self.r.tolist()))


def radial_profile(pn, n=256):
    if n < 64 or n % 2:
        raise DomainError("profile size must be even and at least 64")
    theta = TWO_PI * np.arange(n) / n
    return RadialProfile(n, 1.0 / _checked_values(pn, circle(theta)))


# -- minimum circumscribed centered ellipse ---------------------------------

@dataclass
class Ellipse2:
    """The centered ellipse ``{w : w' M w <= 1}``.

    ``contacts`` holds the angles where the enclosed curve touches the
    ellipse, when known.
    """

    M: np.ndarray
    contacts: np.ndarray = None
    kkt_residual: float = 0.0

    def __post_init__(self):
        self.M = 0.5 * (np.asarray(self.M, dtype=float) + np.asarray(self.M, dtype=float).T)
        w, V = np.linalg.eigh(self.M)
        if w[0] <= 0:
            raise DomainError("ellipse matrix is not positive definite")
        self._sqrt = (V * np.sqrt(w)) @ V.T
        self._isqrt = (V / np.sqrt(w)) @ V.T

    @property
    def sqrt(self):
        """Symmetric square root ``L``; it maps the ellipse onto the unit disk."""
        return self._sqrt

    @property
    def inv_sqrt(self):
        return self._isqrt

    @property
    def area(self):
        return float(np.pi / np.sqrt(np.linalg.det(self.M)))


def _sym(m):
    return np.array([[m[0], m[1]], [m[1], m[2]]])


def _logdet_derivs(m):
    """Gradient and Hessian of ``-log det M`` in the coordinates (m00, m01, m11)."""
    X = np.linalg.inv(_sym(m))
    E = [np.array([[1.0, 0.0], [0.0, 0.0]]),
         np.array([[0.0, 1.0], [1.0, 0.0]]),
         np.array([[0.0, 0.0], [0.0, 1.0]])]
    XE = [X @ e for e in E]
    g = -np.array([np.trace(xe) for xe in XE])
    H = np.array([[np.trace(a @ b) for b in XE] for a in XE])
    return g, H


class CircumscribedEllipse(BaseEstimator, TransformerMixin):
    """Minimum-area origin-centered ellipse containing a planar point set.

    Solves ``max log det M  s.t.  p_k' M p_k <= 1`` by a damped Newton
    log-barrier path on the three free entries of ``M``, then purifies the
    result on the detected active set and certifies it with KKT multipliers.

    Parameters
    ----------
    max_iter : int
        Cap on the total number of barrier Newton steps.
    active_tol : float
        Bound on ``|p_k' M p_k - 1|`` required of every active constraint.
    kkt_tol : float
        Bound on the norm of the stationarity residual of the KKT system.

    Attributes
    ----------
    M_ : ndarray of shape (2, 2)
    active_ : ndarray of int
        Indices of the contact points.
    multipliers_ : ndarray
        Nonnegative KKT multipliers of the active constraints.
    kkt_residual_ : float
    n_iter_ : int
    """

    def __init__(self, max_iter=200, active_tol=1e-9, kkt_tol=1e-8):
        self.max_iter = max_iter
        self.active_tol = active_tol
        self.kkt_tol = kkt_tol

    def fit(self, X, y=None):
        X = check_points(X, 2)
        S = X.T @ X / len(X)
        w, V = np.linalg.eigh(S)
        if w[0] <= 1e-14 * w[-1]:
            raise DomainError("points do not span the plane")
        W = (V / np.sqrt(w)) @ V.T
        Q = X @ W
        c = np.sqrt((Q ** 2).sum(axis=1)).max()
        Q = Q / c
        A = np.column_stack([Q[:, 0] ** 2, 2 * Q[:, 0] * Q[:, 1], Q[:, 1] ** 2])

        m, t, n_iter = self._barrier(A)
        m, active, lam, kkt = self._purify(A, m, t)
        self.n_iter_ = n_iter
        self.active_ = active
        self.multipliers_ = lam
        self.kkt_residual_ = kkt
        self.M_ = W @ _sym(m) @ W / c ** 2
        return self

    def _barrier(self, A):
        N = len(A)
        m = np.array([0.5, 0.0, 0.5])
        t = 1.0
        n_iter = 0

        def dF(m, step, t):
            # objective change, computed as a difference to avoid cancellation at large t
            m1 = m + step
            s0, s1 = A @ m, A @ m1
            M1 = _sym(m1)
            det1 = np.linalg.det(M1)
            if np.any(s1 >= 1.0) or det1 <= 0 or M1[0, 0] <= 0:
                return np.inf
            return (-t * np.log(det1 / np.linalg.det(_sym(m)))
                    - (np.log1p(-s1) - np.log1p(-s0)).sum())

        while True:
            while True:
                if n_iter >= self.max_iter:
                    raise ConvergenceError(
                        f"barrier Newton hit the cap of {self.max_iter} iterations",
                        residual=N / t)
                n_iter += 1
                slack = 1.0 - A @ m
                g0, H0 = _logdet_derivs(m)
                g = t * g0 + (A / slack[:, None]).sum(axis=0)
                H = t * H0 + (A / slack[:, None] ** 2).T @ A
                step = -np.linalg.solve(H, g)
                dec = float(-g @ step)
                if dec < 1e-9:
                    break
                h = 1.0
                while dF(m, h * step, t) > -0.25 * h * dec:
                    h *= 0.5
                    if h < 1e-10:
                        break
                if h < 1e-10:
                    break
                m = m + h * step
            if N / t < 1e-8:
                return m, t, n_iter
            t *= 10.0

    def _purify(self, A, m_bar, t):
        """Equality-constrained Newton on a candidate active set, then a KKT certificate.

        Candidates are ranked by the barrier multipliers ``1 / (t * slack)``.
        The full candidate set is tried first (it is consistent when every
        sample is a contact, as for an ellipse); otherwise subsets of at most
        three constraints are tried. By convexity the first certified
        candidate is the optimum.
        """
        lam_bar = 1.0 / (t * (1.0 - A @ m_bar))
        order = np.argsort(lam_bar)[::-1]
        cand = order[lam_bar[order] > 1e-6 * lam_bar[order[0]]]
        trials = [cand]
        top = cand[:8]
        for size in (3, 2, 1):
            trials += [np.array(c) for c in combinations(top, size)]
        kkt = np.inf
        for act in trials:
            Ar, br = _reduce_rows(A[act])
            m = self._equality_newton(Ar, m_bar, br)
            if m is None:
                continue
            Aa = A[act]
            g, _ = _logdet_derivs(m)
            lam, _ = nnls(Aa.T, -g)
            kkt = float(np.linalg.norm(Aa.T @ lam + g))
            feasible = np.all(A @ m <= 1.0 + self.active_tol)
            tight = np.all(np.abs(Aa @ m - 1.0) <= self.active_tol)
            if feasible and tight and kkt < self.kkt_tol:
                return m, np.sort(act), lam[np.argsort(act)], kkt
        raise ConvergenceError("no active set passed the KKT certificate", residual=kkt)

    @staticmethod
    def _equality_newton(Aa, m, b=None):
        k = len(Aa)
        b = np.ones(k) if b is None else b
        for _ in range(60):
            g, H = _logdet_derivs(m)
            K = np.zeros((3 + k, 3 + k))
            K[:3, :3] = H
            K[:3, 3:] = Aa.T
            K[3:, :3] = Aa
            rhs = np.concatenate([-g, b - Aa @ m])
            step = np.linalg.lstsq(K, rhs, rcond=None)[0][:3]
            h = 1.0
            while np.linalg.eigvalsh(_sym(m + h * step))[0] <= 0:
                h *= 0.5
                if h < 1e-12:
                    return None
            m = m + h * step
            if np.linalg.norm(step) < 1e-15 * np.linalg.norm(m):
                break
        return m

    def transform(self, X):
        """Coordinates in which the fitted ellipse is the unit disk."""
        check_is_fitted(self, "M_")
        X = check_points(X, 2) if np.ndim(X) == 2 else np.asarray(X, dtype=float)
        return X @ Ellipse2(self.M_).sqrt.T

    def inverse_transform(self, X):
        check_is_fitted(self, "M_")
        return np.asarray(X, dtype=float) @ Ellipse2(self.M_).inv_sqrt.T


def _reduce_rows(Aa):
    """Row-compress ``Aa m = 1`` to at most three equations with the same least-squares solutions."""
    if len(Aa) <= 3:
        return Aa, np.ones(len(Aa))
    U, s, Vt = np.linalg.svd(Aa, full_matrices=False)
    r = int(np.sum(s > 1e-12 * s[0]))
    return s[:r, None] * Vt[:r], U[:, :r].T @ np.ones(len(Aa))


def _local_maxima(g):
    return np.flatnonzero((g >= np.roll(g, 1)) & (g >= np.roll(g, -1)))


def _design(P):
    return np.column_stack([P[:, 0] ** 2, 2 * P[:, 0] * P[:, 1], P[:, 1] ** 2])


def min_circumscribed_ellipse(pn, n=512, max_iter=200, refine=True, active_tol=None,
                              kkt_tol=None):
    """Minimum-area centered ellipse containing the unit ball of ``pn``.

    The program is first solved on ``n`` boundary samples. With ``refine``
    the contact angles of the sampled solution seed a Newton solve of the
    KKT system of the continuous problem, so that the result does not
    depend on where the samples fall. The refinement matters when the
    contacts leave a direction in which ``log det`` is only quadratically
    curved (symmetric curves touching at two antipodal pairs); there a
    contact-angle error moves ``M`` at first order. If no refined candidate
    passes its certificate the sampled optimum is returned.
    """
    if n < 64:
        raise DomainError("sample count must be at least 64")
    active_tol = DEFAULTS["ellipse_active"] if active_tol is None else active_tol
    kkt_tol = DEFAULTS["ellipse_kkt"] if kkt_tol is None else kkt_tol
    prof = radial_profile(pn, n if n % 2 == 0 else n + 1)
    fit = CircumscribedEllipse(max_iter=max_iter, active_tol=active_tol, kkt_tol=kkt_tol)
    est = fit.fit(prof.points())
    sampled = Ellipse2(est.M_, prof.theta[est.active_], est.kkt_residual_)
    if not refine or len(est.active_) > 6:
        # with more than six contacts every sample touches: the curve is an ellipse
        return sampled

    contacts = _merge_contacts(pn, prof.theta[est.active_], 1.5 * TWO_PI / prof.n)
    check = TWO_PI * np.arange(4 * prof.n) / (4 * prof.n)
    for size in range(len(contacts), 0, -1):
        for subset in combinations(contacts, size):
            polished = _polish_contacts(pn, est.M_, np.array(subset), check,
                                        kkt_tol, active_tol)
            if polished is not None:
                return polished
    return sampled


def _merge_contacts(pn, contacts, gap):
    """Drop contacts that repeat a kept one: neighbours within ``gap``, or antipodes
    of a symmetric curve (they impose the same constraint)."""
    keep = []
    for th in np.sort(contacts % TWO_PI):
        dup = False
        for k in keep:
            d = abs((th - k + np.pi) % TWO_PI - np.pi)
            if d < gap:
                dup = True
            elif abs(d - np.pi) < gap:
                u = circle(th)
                dup = abs(pn.value(u) - pn.value(-u)) < 1e-12 * pn.value(u)
            if dup:
                break
        if not dup:
            keep.append(th)
    return np.array(keep)


def _contact_terms(pn, theta, m):
    """Value and angle derivatives of ``h(t) = u'Mu / pn(u)^2`` with their m-gradients."""
    M = _sym(m)
    u = circle(theta)
    v = np.array([-u[1], u[0]])
    f = float(pn.value(u))
    gr = pn.grad(u)
    H = pn.hess(u)
    q = u @ M @ u
    q1 = 2 * u @ M @ v
    q2 = 2 * v @ M @ v - 2 * q
    f1 = gr @ v
    f2 = v @ H @ v - f
    h = q / f ** 2
    h1 = q1 / f ** 2 - 2 * q * f1 / f ** 3
    h2 = (q2 / f ** 2 - 4 * q1 * f1 / f ** 3 - 2 * q * f2 / f ** 3
          + 6 * q * f1 ** 2 / f ** 4)
    a_u = np.array([u[0] ** 2, 2 * u[0] * u[1], u[1] ** 2])
    da_u = np.array([2 * u[0] * v[0], 2 * (v[0] * u[1] + u[0] * v[1]), 2 * u[1] * v[1]])
    dq1_dm = 2 * np.array([u[0] * v[0], u[0] * v[1] + u[1] * v[0], u[1] * v[1]])
    a_p = a_u / f ** 2
    da_p = da_u / f ** 2 - 2 * a_u * f1 / f ** 3
    dh1_dm = dq1_dm / f ** 2 - 2 * a_u * f1 / f ** 3
    return h, h1, h2, a_p, da_p, dh1_dm


def _polish_contacts(pn, M, contacts, theta_check, kkt_tol, active_tol):
    """Newton's method on the KKT system of the continuous problem.

    Unknowns are the three entries of ``M``, the contact angles and their
    multipliers. Returns ``None`` unless the result is certified: nonnegative
    multipliers, a small stationarity residual and the whole curve inside.
    """
    th = np.array(contacts, dtype=float)
    k = len(th)
    m = np.array([M[0, 0], M[0, 1], M[1, 1]])
    A0 = np.array([_contact_terms(pn, t, m)[3] for t in th])
    g0, _ = _logdet_derivs(m)
    lam = nnls(A0.T, -g0)[0]

    for _ in range(50):
        g, Hl = _logdet_derivs(m)
        terms = [_contact_terms(pn, t, m) for t in th]
        F = np.concatenate([g + sum(lam[i] * terms[i][3] for i in range(k)),
                            [t[0] - 1.0 for t in terms],
                            [t[1] for t in terms]])
        J = np.zeros((3 + 2 * k, 3 + 2 * k))
        J[:3, :3] = Hl
        for i, (h, h1, h2, a_p, da_p, dh1_dm) in enumerate(terms):
            J[:3, 3 + i] = a_p
            J[:3, 3 + k + i] = lam[i] * da_p
            J[3 + i, :3] = a_p
            J[3 + i, 3 + k + i] = h1
            J[3 + k + i, :3] = dh1_dm
            J[3 + k + i, 3 + k + i] = h2
        try:
            delta = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return None
        m = m + delta[:3]
        lam = lam + delta[3:3 + k]
        th = th + delta[3 + k:]
        if np.abs(delta).max() < 1e-15 * max(np.abs(m).max(), 1.0):
            break

    if np.any(lam < 0) or np.linalg.eigvalsh(_sym(m))[0] <= 0:
        return None
    g, _ = _logdet_derivs(m)
    A_act = np.array([_contact_terms(pn, t, m)[3] for t in th])
    kkt = float(np.linalg.norm(A_act.T @ lam + g))
    u = circle(theta_check)
    h_all = np.einsum("ki,ij,kj->k", u, _sym(m), u) / pn.value(u) ** 2
    if kkt >= kkt_tol or h_all.max() > 1.0 + active_tol:
        return None
    return Ellipse2(_sym(m), th % TWO_PI, kkt)


# -- normalized profiles and defects ----------------------------------------

@dataclass
class NormalizedNorm:
    """``pn`` composed with the inverse square root of its circumscribed ellipse."""

    pn: object
    ellipse: Ellipse2

    def profile(self, theta):
        u = circle(theta) @ self.ellipse.inv_sqrt.T
        return 1.0 / _checked_values(self.pn, u)


def normalize(pn, n=512):
    return NormalizedNorm(pn, min_circumscribed_ellipse(pn, n))


@dataclass
class EquivalenceResult:
    defect: float
    best_map: np.ndarray
    best_angle: float
    reflected: bool

    def as_dict(self):
        return {"defect": float(self.defect), "best_map": self.best_map.tolist(),
                "best_angle": float(self.best_angle), "reflected": bool(self.reflected)}


def _golden(f, lo, hi, tol=1e-9):
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": tol})
    return float(res.x), float(res.fun)


def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@lru_cache(maxsize=8)
def _shift_indices(n):
    k = np.arange(n)
    return (k[None, :] + k[:, None]) % n, (k[:, None] - k[None, :]) % n


class _PeriodicCubic:
    """Periodic cubic spline on a uniform grid, evaluated without per-call overhead."""

    def __init__(self, r):
        n = len(r)
        self.step = TWO_PI / n
        knots = self.step * np.arange(n + 1)
        self.c = CubicSpline(knots, np.append(r, r[0]), bc_type="periodic").c
        self.n = n

    def __call__(self, x):
        x = np.mod(x, TWO_PI)
        i = np.minimum((x / self.step).astype(int), self.n - 1)
        dt = x - i * self.step
        c = self.c
        return ((c[0, i] * dt + c[1, i]) * dt + c[2, i]) * dt + c[3, i]


def _shift_search(r1, r2, n_candidates=2):
    """Best ``(theta, sigma)`` with ``r2[k] ~ r1(sigma * theta_k + theta)``.

    The coarse grid of shifts coincides with the sample grid, so it needs no
    interpolation; the best coarse minima are then polished by golden-section
    search on a periodic cubic interpolant of ``r1``.
    """
    n = len(r1)
    step = TWO_PI / n
    theta_k = step * np.arange(n)
    spline = _PeriodicCubic(r1)
    coarse = {s: np.abs(r2[None, :] - r1[idx]).max(axis=1)
              for s, idx in zip((1, -1), _shift_indices(n))}
    floor = min(c.min() for c in coarse.values())
    best = (np.inf, 0.0, 1)
    for sigma, vals in coarse.items():
        j0 = int(np.argmin(vals))
        if vals[j0] < best[0]:
            best = (float(vals[j0]), j0 * step, sigma)
        minima = _local_maxima(-vals)
        minima = minima[np.argsort(vals[minima])[:n_candidates]]
        minima = minima[vals[minima] <= 2.0 * floor + 1e-12]
        if floor <= 1e-13:
            # already at rounding level; interpolation cannot improve on it
            minima = minima[:0]

        def d(theta, sigma=sigma):
            return np.abs(r2 - spline(sigma * theta_k + theta)).max()

        for j in minima:
            th, val = _golden(d, (j - 1) * step, (j + 1) * step)
            if val < best[0]:
                best = (float(val), th % TWO_PI, sigma)
    return best


def _check_size(n):
    if n < 256 or n % 2:
        raise DomainError("profile size must be even and at least 256")


def equivalence_defect(pn1, pn2, n=512, _normalized=None):
    """Sup-norm mismatch of normalized radial profiles, minimized over ``O(2)``.

    ``best_map`` sends the unit ball of ``pn1`` onto (approximately) that of
    ``pn2``, i.e. ``pn2(best_map @ w) ~ pn1(w)``.
    """
    _check_size(n)
    a, b = _normalized if _normalized is not None else (normalize(pn1, n), normalize(pn2, n))
    theta = TWO_PI * np.arange(n) / n
    r1, r2 = a.profile(theta), b.profile(theta)
    defect, angle, sigma = _shift_search(r1, r2)
    O = _rotation(angle) @ np.diag([1.0, float(sigma)])
    best_map = b.ellipse.inv_sqrt @ O.T @ a.ellipse.sqrt
    return EquivalenceResult(defect, best_map, angle, sigma < 0)


def ellipse_defect(pn, n=512, _normalized=None):
    """``max |r - 1|`` of the normalized profile; zero iff the unit circle is a centered ellipse."""
    _check_size(n)
    a = _normalized if _normalized is not None else normalize(pn, n)
    return float(np.abs(a.profile(TWO_PI * np.arange(n) / n) - 1.0).max())


def self_rotation_defect(pn, n_angles=360, n=512):
    """Mismatch between the normalized profile and its rotation, per grid angle.

    Returns an ``(n_angles, 2)`` array of ``(theta, defect)`` rows.
    """
    if n_angles < 64:
        raise DomainError("n_angles must be at least 64")
    a = normalize(pn, n)
    theta_k = TWO_PI * np.arange(n) / n
    base = a.profile(theta_k)
    angles = TWO_PI * np.arange(n_angles) / n_angles
    out = np.empty((n_angles, 2))
    for j, th in enumerate(angles):
        out[j] = th, np.abs(base - a.profile(theta_k + th)).max()
    return out


def zero_runs(defects, tol):
    """Lengths of maximal cyclic runs of grid angles with defect below ``tol``."""
    below = np.asarray(defects) < tol
    if below.all():
        return [len(below)]
    start = int(np.argmin(below))
    rolled = np.roll(below, -start)
    runs, cur = [], 0
    for b in rolled:
        if b:
            cur += 1
        elif cur:
            runs.append(cur)
            cur = 0
    if cur:
        runs.append(cur)
    return runs


def is_equivalent(pn1, pn2, n=512, tau_eq=None):
    tau = DEFAULTS["tau_eq"] if tau_eq is None else tau_eq
    return equivalence_defect(pn1, pn2, n).defect < tau


def exact_equivalence_defect(pn1, pn2, n=512, n_angles=10000, _normalized=None):
    """Equivalence defect by exhaustive search with exact profile evaluation.

    No interpolation is involved: every candidate rotation on a grid of
    ``n_angles`` (with and without reflection) is scored by evaluating the
    first norm at the rotated sample directions. Slower than
    :func:`equivalence_defect` and limited by the angle grid, which makes it
    a useful cross-check of the polished value.
    """
    _check_size(n)
    a, b = _normalized if _normalized is not None else (normalize(pn1, n), normalize(pn2, n))
    theta_k = TWO_PI * np.arange(n) / n
    r2 = b.profile(theta_k)
    best = np.inf
    for sigma in (1.0, -1.0):
        for chunk in np.array_split(TWO_PI * np.arange(n_angles) / n_angles,
                                    max(1, n_angles // 1000)):
            r1 = a.profile(sigma * theta_k[None, :] + chunk[:, None])
            best = min(best, float(np.abs(r1 - r2).max(axis=1).min()))
    return best
