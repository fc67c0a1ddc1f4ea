"""Finsler geodesics on planar charts and the rotation-metric diagnostics."""

from dataclasses import dataclass

import numpy as np

from .exceptions import DegeneracyError, DomainError
from .surfaces import RotationMetric, rotation

CSV_COLUMNS = ("t", "x", "y", "vx", "vy", "phi_speed", "noether")


def rotation_metric(phi0):
    """``phi(x, y, v) = phi0(R^y v)``."""
    return RotationMetric(phi0)


def _energy_parts(metric, x, v):
    phi, g, dx, dvv, dxv = metric.jet(x, v)
    phi = np.asarray(phi, dtype=float)[..., None]
    Lvv = g[..., :, None] * g[..., None, :] + phi[..., None] * dvv
    Lx = phi * dx
    # Lxv[..., i, j] = d^2 L / dx_i dv_j
    Lxv = dx[..., :, None] * g[..., None, :] + phi[..., None] * dxv
    return phi[..., 0], Lvv, Lx, Lxv


def geodesic_rhs(metric, x, v):
    """Euler-Lagrange equations of ``L = phi^2 / 2`` solved for the acceleration.

    Returns ``(xdot, vdot)`` with ``xdot = v`` and
    ``vdot = L_vv^{-1} (L_x - L_vx v)``. Broadcasts over leading axes.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(~np.any(v != 0, axis=-1)):
        raise DomainError("velocity must be nonzero")
    _, Lvv, Lx, Lxv = _energy_parts(metric, x, v)
    try:
        np.linalg.cholesky(Lvv)
    except np.linalg.LinAlgError:
        raise DegeneracyError(f"energy Hessian not positive definite at x={x.tolist()}, "
                              f"v={v.tolist()}") from None
    rhs = Lx - np.einsum("...ij,...i->...j", Lxv, v)
    return v.copy(), np.linalg.solve(Lvv, rhs[..., None])[..., 0]


@dataclass
class GeodesicTrajectory:
    times: np.ndarray
    states: np.ndarray
    speeds: np.ndarray
    speed_drift: float
    noether: np.ndarray = None
    noether_drift: float = None
    noether_phi_drift: float = None
    completed: bool = True

    @property
    def endpoint(self):
        return self.states[-1, :2]

    def rows(self):
        mom = self.noether if self.noether is not None else np.full(len(self.times), np.nan)
        return [(float(t), *map(float, s), float(p), float(m))
                for t, s, p, m in zip(self.times, self.states, self.speeds, mom)]

    def as_dict(self):
        return {
            "endpoint": self.endpoint.tolist(),
            "speed_drift": self.speed_drift,
            "noether_drift": self.noether_drift,
            "noether_phi_drift": self.noether_phi_drift,
            "completed": self.completed,
            "steps": len(self.times) - 1,
        }


def _rk4(metric, S, h, steps):
    """Fixed-step RK4 on a batch of states ``(k, 4)``; stops at the first non-finite step."""
    def f(s):
        dx, dv = geodesic_rhs(metric, s[:, :2], s[:, 2:])
        return np.concatenate([dx, dv], axis=1)

    out = [S]
    for _ in range(steps):
        s = out[-1]
        k1 = f(s)
        k2 = f(s + 0.5 * h * k1)
        k3 = f(s + 0.5 * h * k2)
        k4 = f(s + h * k3)
        nxt = s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(nxt)):
            return np.array(out), False
        out.append(nxt)
    return np.array(out), True


def _trajectory(metric, states, h, completed):
    times = h * np.arange(len(states))
    phi, g, *_ = metric.jet(states[:, :2], states[:, 2:])
    out = GeodesicTrajectory(times, states, phi, float(np.abs(phi - phi[0]).max()),
                             completed=completed)
    if metric.x_translation_invariant:
        dxi = g[:, 0]
        mom = phi * dxi
        out.noether = mom
        out.noether_drift = float(np.abs(mom - mom[0]).max())
        out.noether_phi_drift = float(np.abs(dxi - dxi[0]).max())
    return out


def _check(steps, V0):
    if steps < 16:
        raise DomainError("steps must be at least 16")
    if np.any(~np.any(V0 != 0, axis=-1)):
        raise DomainError("v0 must be nonzero")


def integrate_geodesic(metric, x0, v0, T=1.0, steps=1024):
    """Classical fourth-order Runge-Kutta with fixed step ``T / steps``.

    The speed ``phi(x, v)`` is tracked for every stored state; for metrics
    that do not depend on the first chart coordinate the momentum
    ``dL/dxi = phi * dphi/dxi`` is tracked as well, together with the
    drift of ``dphi/dxi`` itself. A non-finite state stops the integration
    and returns what was computed so far with ``completed=False``.
    """
    return integrate_geodesics(metric, [x0], [v0], T, steps)[0]


def integrate_geodesics(metric, X0, V0, T=1.0, steps=1024):
    """Integrate a batch of geodesics in lockstep; see :func:`integrate_geodesic`."""
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    V0 = np.atleast_2d(np.asarray(V0, dtype=float))
    _check(steps, V0)
    h = T / steps
    S = np.concatenate([X0, V0], axis=1)
    states, completed = _rk4(metric, S, h, steps)
    if not completed and len(S) > 1:
        # rerun separately so only the offending trajectories are truncated
        return [integrate_geodesics(metric, x, v, T, steps)[0] for x, v in zip(X0, V0)]
    return [_trajectory(metric, states[:, k], h, completed) for k in range(len(S))]


def horizontal_residual(phi0, y, velocity=(1.0, 0.0)):
    """``-d/dy phi0(R^y w)``: the second Euler-Lagrange residual along a horizontal line.

    ``velocity`` defaults to the horizontal direction ``(1, 0)``; pass
    ``(0, 1)`` for the variant with the vertical argument.
    """
    w = np.asarray(velocity, dtype=float)
    u = rotation(y) @ w
    return -float(phi0.grad(u) @ np.array([-u[1], u[0]]))


def euclidean_arc_defect(phi0, theta_lo, theta_hi, n=256):
    """Oscillation ``max - min`` of ``phi0`` on an arc of the Euclidean unit circle."""
    if not theta_lo < theta_hi:
        raise DomainError("theta_lo must be smaller than theta_hi")
    if n < 32:
        raise DomainError("n must be at least 32")
    t = np.linspace(theta_lo, theta_hi, n)
    vals = phi0.value(np.column_stack([np.cos(t), np.sin(t)]))
    return float(vals.max() - vals.min())
