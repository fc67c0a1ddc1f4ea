"""Banach-Minkowski norms on R^3, the Gr_2 chart and sampling utilities."""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .exceptions import DomainError, EvaluationError
from .tolerances import DEFAULTS
from .validation import as_spd, as_vector


def _quad(v, Q):
    return np.einsum("...i,ij,...j->...", v, Q, v)


class RootSumNorm:
    """Norm of the form ``sum_i sqrt(v' Q_i v) + b . v`` in any dimension.

    Every closed-form family of the package (ellipsoids, Randers norms, sums
    of two ellipsoidal norms and their planar counterparts) is of this shape,
    so value, gradient and Hessian are shared here. All methods broadcast
    over leading axes of ``v``.
    """

    family = "root_sum"

    def __init__(self, terms, linear=None):
        self.terms = [np.asarray(Q, dtype=float) for Q in terms]
        self.dim = self.terms[0].shape[0]
        self.linear = (np.zeros(self.dim) if linear is None
                       else np.asarray(linear, dtype=float))

    def __call__(self, v):
        return self.value(v)

    def value(self, v):
        v = np.asarray(v, dtype=float)
        out = v @ self.linear
        for Q in self.terms:
            out = out + np.sqrt(_quad(v, Q))
        return out

    def grad(self, v):
        v = np.asarray(v, dtype=float)
        out = np.broadcast_to(self.linear, v.shape).copy()
        for Q in self.terms:
            s = np.sqrt(_quad(v, Q))
            out += (v @ Q) / s[..., None]
        return out

    def hess(self, v):
        """Hessian of the norm itself (not of its square)."""
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape + (self.dim,))
        for Q in self.terms:
            s = np.sqrt(_quad(v, Q))[..., None, None]
            g = (v @ Q)[..., :, None] / s
            out += (Q - g * np.swapaxes(g, -1, -2)) / s
        return out

    def jet(self, v):
        """Value, gradient and Hessian in one pass."""
        v = np.asarray(v, dtype=float)
        val = v @ self.linear
        grad = np.broadcast_to(self.linear, v.shape).copy()
        hess = np.zeros(v.shape + (self.dim,))
        for Q in self.terms:
            s = np.sqrt(_quad(v, Q))
            g = (v @ Q) / s[..., None]
            val = val + s
            grad += g
            hess += (Q - g[..., :, None] * g[..., None, :]) / s[..., None, None]
        return val, grad, hess

    def hess_sq(self, v):
        """Hessian of the squared norm, ``2 g g' + 2 phi H``."""
        v = np.asarray(v, dtype=float)
        g = self.grad(v)
        phi = self.value(v)[..., None, None]
        return 2.0 * g[..., :, None] * g[..., None, :] + 2.0 * phi * self.hess(v)


class EllipsoidNorm(RootSumNorm):
    """``sqrt(v' Q v)``; its unit ball is a centered ellipsoid."""

    family = "ellipsoid"

    def __init__(self, Q):
        self.Q = as_spd(Q, 3, name="Q")
        super().__init__([self.Q])

    def spec(self):
        return {"family": self.family, "Q": self.Q.tolist()}


class RandersNorm(RootSumNorm):
    """``sqrt(v' Q v) + b . v``, a valid norm iff ``b' Q^{-1} b < 1``."""

    family = "randers"

    def __init__(self, Q, b):
        self.Q = as_spd(Q, 3, name="Q")
        self.b = as_vector(b, 3, name="b")
        super().__init__([self.Q], self.b)

    @property
    def admissible(self):
        return float(self.b @ np.linalg.solve(self.Q, self.b)) < 1.0

    def spec(self):
        return {"family": self.family, "Q": self.Q.tolist(), "b": self.b.tolist()}


class Sum2Norm(RootSumNorm):
    """``sqrt(v' Q1 v) + sqrt(v' Q2 v)``; not Euclidean unless Q1 and Q2 are proportional."""

    family = "sum2"

    def __init__(self, Q1, Q2):
        self.Q1 = as_spd(Q1, 3, name="Q1")
        self.Q2 = as_spd(Q2, 3, name="Q2")
        super().__init__([self.Q1, self.Q2])

    def spec(self):
        return {"family": self.family, "Q1": self.Q1.tolist(), "Q2": self.Q2.tolist()}


class CustomNorm:
    """Norm given by a scalar callable; missing derivatives use central differences."""

    family = "custom"

    def __init__(self, func, grad=None, hess=None, dim=3, step=1e-5):
        self._func = func
        self._grad = grad
        self._hess = hess
        self.dim = dim
        self.step = step

    def __call__(self, v):
        return self.value(v)

    def value(self, v):
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            return float(self._func(v))
        flat = v.reshape(-1, self.dim)
        return np.array([self._func(row) for row in flat]).reshape(v.shape[:-1])

    def grad(self, v):
        v = np.asarray(v, dtype=float)
        if self._grad is not None:
            return np.asarray(self._grad(v), dtype=float)
        return fd_grad(self.value, v, self.step)

    def hess(self, v):
        v = np.asarray(v, dtype=float)
        if self._hess is not None:
            return np.asarray(self._hess(v), dtype=float)
        return fd_jacobian(self.grad, v, self.step)

    def hess_sq(self, v):
        g = self.grad(v)
        return 2.0 * np.multiply.outer(g, g) + 2.0 * self.value(v) * self.hess(v)

    def spec(self):
        return {"family": self.family}


def fd_grad(func, v, step):
    """Central-difference gradient of a scalar function at a single point."""
    v = np.asarray(v, dtype=float)
    h = step * max(np.linalg.norm(v), 1.0)
    out = np.empty_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h
        out[i] = (func(v + e) - func(v - e)) / (2 * h)
    return out


def fd_jacobian(func, v, step):
    """Central-difference Jacobian (rows: output components) of a vector function."""
    v = np.asarray(v, dtype=float)
    h = step * max(np.linalg.norm(v), 1.0)
    cols = []
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h
        cols.append((np.asarray(func(v + e)) - np.asarray(func(v - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def fd_hessian(func, v, step):
    """Second central differences of a scalar function at a single point."""
    v = np.asarray(v, dtype=float)
    h = step * max(np.linalg.norm(v), 1.0)
    d = v.size
    out = np.empty((d, d))
    eye = np.eye(d) * h
    for i in range(d):
        for j in range(i, d):
            ei, ej = eye[i], eye[j]
            out[i, j] = out[j, i] = (func(v + ei + ej) - func(v + ei - ej)
                                     - func(v - ei + ej) + func(v - ei - ej)) / (4 * h * h)
    return out


def sphere_directions(n, seed=0):
    """``n`` quasi-uniform unit vectors: a Fibonacci lattice under a seeded rotation."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    rho = np.sqrt(1.0 - z * z)
    t = np.pi * (1.0 + 5.0 ** 0.5) * k
    pts = np.column_stack([rho * np.cos(t), rho * np.sin(t), z])
    return Rotation.random(random_state=seed).apply(pts)


@dataclass
class ValidityReport:
    homogeneity_residual: float
    euler_residual: float
    min_hess_eig: float
    grad_fd_residual: float
    hess_fd_residual: float
    min_value: float
    verdict: bool

    def as_dict(self):
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                for k, v in self.__dict__.items()}


def check_banach_minkowski(norm, n_samples=256, seed=0, tolerances=None):
    """Probe a norm oracle for the Banach-Minkowski axioms.

    Homogeneity, the Euler identity and both derivative oracles are checked
    against the norm's own values at ``n_samples`` quasi-uniform unit
    directions; strict convexity is the smallest eigenvalue of the Hessian
    of the squared norm. A nonpositive value anywhere fails the verdict.
    """
    if n_samples < 16:
        raise DomainError("n_samples must be at least 16")
    tol = dict(DEFAULTS, **(tolerances or {}))
    rng = np.random.default_rng(seed)
    dirs = sphere_directions(n_samples, seed)
    lams = rng.uniform(0.1, 10.0, n_samples)

    hom = eul = gfd = hfd = 0.0
    min_eig = np.inf
    min_val = np.inf
    for v, lam in zip(dirs, lams):
        val = norm.value(v)
        g = norm.grad(v)
        H = norm.hess_sq(v)
        if not (np.isfinite(val) and np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
            raise EvaluationError(f"non-finite norm oracle output at direction {v.tolist()}")
        min_val = min(min_val, float(val))
        scale = max(abs(val), 1e-300)
        hom = max(hom, abs(norm.value(lam * v) - lam * val) / (lam * scale),
                  np.linalg.norm(norm.grad(lam * v) - g) / max(np.linalg.norm(g), 1e-300))
        eul = max(eul, abs(g @ v - val) / scale)
        g_fd = fd_grad(norm.value, v, 1e-5)
        gfd = max(gfd, np.linalg.norm(g_fd - g) / max(np.linalg.norm(g), 1e-300))
        H_fd = fd_hessian(lambda w: norm.value(w) ** 2, v, 1e-3)
        hfd = max(hfd, np.abs(H_fd - H).max() / max(np.abs(H).max(), 1e-300))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(0.5 * (H + H.T))[0]))

    verdict = bool(min_val > 0 and min_eig > 0
                   and hom < tol["homogeneity"] and eul < tol["euler"]
                   and gfd < tol["grad_fd"] and hfd < tol["hess_fd"])
    return ValidityReport(float(hom), float(eul), float(min_eig), float(gfd),
                          float(hfd), float(min_val), verdict)


@dataclass(frozen=True, eq=False)
class Plane3:
    """A plane ``a x + b y + z = 0`` of the Gr_2 chart with a stored basis.

    ``basis`` holds the spanning vectors as rows. ``conormal`` is the
    covector ``(a, b, 1)`` which kills the plane and takes the value 1 on e3.
    """

    alpha: tuple
    basis: np.ndarray = field(repr=False)

    @property
    def conormal(self):
        a, b = self.alpha
        return np.array([a, b, 1.0])

    def rebased(self, A):
        """Same plane, spanned by the rows of ``A @ basis``."""
        return Plane3(self.alpha, np.asarray(A, dtype=float) @ self.basis)

    def check_basis(self, tol=1e-12):
        s = np.linalg.svd(self.basis, compute_uv=False)
        if s[-1] <= tol * max(s[0], 1.0):
            raise DomainError(f"degenerate basis for plane alpha={self.alpha}")
        if np.abs(self.basis @ self.conormal).max() > 1e-9 * max(s[0], 1.0):
            raise DomainError(f"basis vectors leave the plane alpha={self.alpha}")


def plane_from_alpha(a, b):
    a, b = float(a), float(b)
    basis = np.array([[1.0, 0.0, -a], [0.0, 1.0, -b]])
    return Plane3((a, b), basis)


def alpha_from_conormal(conormal):
    """Chart coordinates of the plane killed by ``conormal``.

    Planes containing e3 are outside the chart and raise ``DomainError``.
    """
    c = as_vector(conormal, 3, name="conormal")
    if abs(c[2]) <= 1e-12 * np.linalg.norm(c):
        raise DomainError("plane contains e3 and lies outside the (a, b) chart")
    return (float(c[0] / c[2]), float(c[1] / c[2]))


def plane_from_normal(normal):
    return plane_from_alpha(*alpha_from_conormal(normal))


def sample_plane_neighborhood(center, radius, count, seed=0):
    """Planes with chart coordinates uniform in a disk; element 0 is the center."""
    if radius < 0:
        raise DomainError("radius must be nonnegative")
    if count < 2:
        raise DomainError("count must be at least 2")
    a0, b0 = map(float, center)
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(size=count - 1))
    t = rng.uniform(0.0, 2 * np.pi, size=count - 1)
    planes = [plane_from_alpha(a0, b0)]
    planes += [plane_from_alpha(a0 + ri * np.cos(ti), b0 + ri * np.sin(ti))
               for ri, ti in zip(r, t)]
    return planes


def unit_vector(norm, v):
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise DomainError("unit_vector of the zero vector")
    val = norm.value(v)
    if not np.isfinite(val) or val <= 0:
        raise EvaluationError(f"norm value {val} at direction {v.tolist()}")
    return v / val


def opposite_unit_vector(norm, v):
    """``-v / norm(-v)``; differs from ``-v`` when the norm is not symmetric."""
    return unit_vector(norm, -np.asarray(v, dtype=float))
