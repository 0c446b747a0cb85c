"""Per-class recursive state estimation.

Two filters share a 10-dim state with the observed box in the first seven
slots (x, y, z, yaw, l, w, h):

* CV   -- linear Kalman filter; tail states (vx, vy, vz).
* CYRA -- extended Kalman filter over a constant turn rate and acceleration
  model; tail states (v, a, omega). The mean propagates through the exact
  kinematic integral; below ``OMEGA_EPS`` the straight-line-with-acceleration
  limit is used so the turn-rate division stays well conditioned.

Process noise is the exact discretization of a continuous-time model, so CV
prediction is additive in dt for both mean and covariance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .core import Box3D, MotionModel, ObjectClass, wrap_angle
from .errors import DegenerateCovarianceError, ValidationError

STATE_DIM = 10
OBS_DIM = 7
OMEGA_EPS = 1e-6
# state slot indices shared by both models
IX, IY, IZ, IYAW, IL, IW, IH = range(7)
_OBS_IDX = np.arange(OBS_DIM)


@dataclass(frozen=True)
class ClassNoise:
    """Continuous-time noise intensities and observation variance."""

    q_pos: float = 0.01
    q_vel: float = 0.01
    r_obs: float = 0.1

    def __post_init__(self):
        for name in ("q_pos", "q_vel", "r_obs"):
            if getattr(self, name) <= 0.0:
                raise ValidationError(name, "noise intensity must be positive")


@dataclass(frozen=True)
class NoiseConfig:
    """Per-class noise with a global default."""

    default: ClassNoise = field(default_factory=ClassNoise)
    per_class: Dict[str, ClassNoise] = field(default_factory=dict)

    def for_class(self, name: str) -> ClassNoise:
        return self.per_class.get(name, self.default)

    def r_diag(self, name: str) -> np.ndarray:
        return np.full(OBS_DIM, self.for_class(name).r_obs)


@dataclass
class FilterState:
    """Gaussian state: ``mean`` (10,), ``cov`` (10, 10) symmetric PSD."""

    model: MotionModel
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).copy()
        self.cov = np.asarray(self.cov, dtype=float).copy()
        if self.mean.shape != (STATE_DIM,):
            raise ValidationError("mean", "expected (%d,)" % STATE_DIM)
        if self.cov.shape != (STATE_DIM, STATE_DIM):
            raise ValidationError("cov", "expected (%d, %d)" % (STATE_DIM, STATE_DIM))
        if np.abs(self.cov - self.cov.T).max() > 1e-9:
            raise ValidationError("cov", "must be symmetric")

    def copy(self) -> "FilterState":
        return FilterState(self.model, self.mean.copy(), self.cov.copy())


def init_state(
    box: Box3D,
    obj_class: ObjectClass,
    p0_obs: float = 1.0,
    p0_kin: float = 10.0,
) -> FilterState:
    """Fresh filter state from a first observation; kinematic tail at rest."""
    mean = np.zeros(STATE_DIM)
    mean[:OBS_DIM] = (box.x, box.y, box.z, box.yaw, box.l, box.w, box.h)
    cov = np.diag([p0_obs] * OBS_DIM + [p0_kin] * (STATE_DIM - OBS_DIM))
    return FilterState(obj_class.motion_model, mean, cov)


def state_box(state: FilterState) -> Box3D:
    x, y, z, yaw, l, w, h = state.mean[:OBS_DIM]
    return Box3D(x, y, z, w, l, h, wrap_angle(yaw))


def speed(state: FilterState) -> float:
    """Ground speed estimate in m/s."""
    if state.model is MotionModel.CV:
        return math.hypot(state.mean[7], state.mean[8])
    return abs(state.mean[7])


def ctra_step(
    x: float, y: float, yaw: float, v: float, a: float, omega: float, dt: float
) -> Tuple[float, float, float, float]:
    """Exact one-step integral of the turning kinematics.

    Returns (x', y', yaw', v') after dt seconds under acceleration ``a`` and
    turn rate ``omega``. Heading rate integrates to yaw' = yaw + omega dt and
    the position integral has the closed form

        x' = x + (v/w)(sin yaw' - sin yaw) + (a/w^2)(cos yaw' - cos yaw
             + w dt sin yaw')

    (and the mirrored expression for y'). For |omega| < OMEGA_EPS the
    straight-line limit x' = x + (v dt + a dt^2/2) cos yaw applies.
    """
    yaw_next = yaw + omega * dt
    v_next = v + a * dt
    if abs(omega) < OMEGA_EPS:
        dist = v * dt + 0.5 * a * dt * dt
        return x + dist * math.cos(yaw), y + dist * math.sin(yaw), yaw_next, v_next
    sy, cy = math.sin(yaw), math.cos(yaw)
    sy2, cy2 = math.sin(yaw_next), math.cos(yaw_next)
    inv_w = 1.0 / omega
    inv_w2 = inv_w * inv_w
    x_next = x + v * inv_w * (sy2 - sy) + a * inv_w2 * (cy2 - cy + omega * dt * sy2)
    y_next = y + v * inv_w * (cy - cy2) + a * inv_w2 * (sy2 - sy - omega * dt * cy2)
    return x_next, y_next, yaw_next, v_next


def _cv_transition(dt: float) -> np.ndarray:
    f = np.eye(STATE_DIM)
    f[IX, 7] = dt
    f[IY, 8] = dt
    f[IZ, 9] = dt
    return f


def _cv_process_noise(dt: float, noise: ClassNoise) -> np.ndarray:
    q = np.zeros((STATE_DIM, STATE_DIM))
    # white-noise acceleration blocks couple each axis with its velocity
    q11 = noise.q_vel * dt**3 / 3.0
    q12 = noise.q_vel * dt**2 / 2.0
    q22 = noise.q_vel * dt
    for pos, vel in ((IX, 7), (IY, 8), (IZ, 9)):
        q[pos, pos] += q11
        q[pos, vel] = q12
        q[vel, pos] = q12
        q[vel, vel] = q22
    for idx in range(OBS_DIM):
        q[idx, idx] += noise.q_pos * dt
    return q


def _cyra_mean_and_jacobian(mean: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    x, y, yaw = mean[IX], mean[IY], mean[IYAW]
    v, a, omega = mean[7], mean[8], mean[9]
    nxt = mean.copy()
    nxt[IX], nxt[IY], nxt[IYAW], nxt[7] = ctra_step(x, y, yaw, v, a, omega, dt)

    jac = np.eye(STATE_DIM)
    sy, cy = math.sin(yaw), math.cos(yaw)
    if abs(omega) < OMEGA_EPS:
        dist = v * dt + 0.5 * a * dt * dt
        # straight-line limit, including the leading-order turn sensitivity
        arc = 0.5 * v * dt * dt + a * dt**3 / 3.0
        jac[IX, IYAW] = -dist * sy
        jac[IX, 7] = dt * cy
        jac[IX, 8] = 0.5 * dt * dt * cy
        jac[IX, 9] = -arc * sy
        jac[IY, IYAW] = dist * cy
        jac[IY, 7] = dt * sy
        jac[IY, 8] = 0.5 * dt * dt * sy
        jac[IY, 9] = arc * cy
    else:
        yaw2 = yaw + omega * dt
        sy2, cy2 = math.sin(yaw2), math.cos(yaw2)
        inv_w = 1.0 / omega
        inv_w2 = inv_w * inv_w
        s_term = sy2 - sy
        t_term = cy2 - cy + omega * dt * sy2
        u_term = cy - cy2
        v_term = sy2 - sy - omega * dt * cy2
        jac[IX, IYAW] = v * inv_w * (cy2 - cy) + a * inv_w2 * (-sy2 + sy + omega * dt * cy2)
        jac[IX, 7] = inv_w * s_term
        jac[IX, 8] = inv_w2 * t_term
        jac[IX, 9] = (
            v * inv_w2 * (omega * dt * cy2 - s_term)
            + a * dt * dt * inv_w * cy2
            - 2.0 * a * inv_w2 * inv_w * t_term
        )
        jac[IY, IYAW] = v * inv_w * s_term + a * inv_w2 * t_term
        jac[IY, 7] = inv_w * u_term
        jac[IY, 8] = inv_w2 * v_term
        jac[IY, 9] = (
            v * inv_w2 * (omega * dt * sy2 - u_term)
            + a * dt * dt * inv_w * sy2
            - 2.0 * a * inv_w2 * inv_w * v_term
        )
    jac[IYAW, 9] = dt
    jac[7, 8] = dt
    return nxt, jac


def _cyra_process_noise(dt: float, noise: ClassNoise) -> np.ndarray:
    diag = np.empty(STATE_DIM)
    diag[:OBS_DIM] = noise.q_pos * dt
    diag[OBS_DIM:] = noise.q_vel * dt
    return np.diag(diag)


def predict(state: FilterState, dt: float, noise: ClassNoise) -> FilterState:
    """Propagate the state ``dt`` seconds forward."""
    if dt <= 0.0 or not math.isfinite(dt):
        raise ValidationError("dt", "must be positive and finite, got %r" % dt)
    if state.model is MotionModel.CV:
        f = _cv_transition(dt)
        mean = f @ state.mean
        q = _cv_process_noise(dt, noise)
    else:
        mean, f = _cyra_mean_and_jacobian(state.mean, dt)
        q = _cyra_process_noise(dt, noise)
    mean[IYAW] = wrap_angle(mean[IYAW])
    cov = f @ state.cov @ f.T + q
    cov = (cov + cov.T) / 2.0
    return FilterState(state.model, mean, cov)


def update(state: FilterState, obs: Box3D, r_diag: np.ndarray) -> FilterState:
    """Fuse a box observation; the yaw innovation is wrapped."""
    r_diag = np.asarray(r_diag, dtype=float)
    if r_diag.shape != (OBS_DIM,):
        raise ValidationError("r_diag", "expected (%d,)" % OBS_DIM)
    z = np.array([obs.x, obs.y, obs.z, obs.yaw, obs.l, obs.w, obs.h])
    innov = z - state.mean[:OBS_DIM]
    innov[IYAW] = wrap_angle(innov[IYAW])

    p = state.cov
    s = p[np.ix_(_OBS_IDX, _OBS_IDX)] + np.diag(r_diag)
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise DegenerateCovarianceError("innovation covariance is singular")
    # K = P H' S^-1 via two triangular solves
    pht = p[:, :OBS_DIM]
    gain = np.linalg.solve(
        chol.T, np.linalg.solve(chol, pht.T)
    ).T

    mean = state.mean + gain @ innov
    mean[IYAW] = wrap_angle(mean[IYAW])
    ikh = np.eye(STATE_DIM)
    ikh[:, :OBS_DIM] -= gain
    cov = ikh @ p @ ikh.T + gain @ np.diag(r_diag) @ gain.T
    cov = (cov + cov.T) / 2.0
    return FilterState(state.model, mean, cov)
