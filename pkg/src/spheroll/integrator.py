"""Fixed-step time integration of the rolling robot under a motor speed profile.

The motor is an ideal velocity source: the pendulum angle follows the
:class:`DriveProfile` exactly and its acceleration feeds back into the shell
through the inertial term. Orientation, angular velocity and the shell
center are advanced together with classical RK4; the center uses the
rolling constraint ``s_dot = omega x R z`` at every stage.
"""

import bisect
import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from spheroll import _kernel
from spheroll.dynamics import (
    ContactReport,
    ShellState,
    angular_acceleration,
    center_acceleration,
    classify_contact,
    contact_force,
    damping_torque,
    mass_acceleration,
    pendulum_kinematics,
)
from spheroll.errors import ContactViolationError, DegenerateInputError, InvalidStateError
from spheroll.spatial import E_Z

DEFAULT_DT = 1e-3
DEFAULT_STRIDE = 0.01
MAX_DT = 0.01
DEFAULT_MOTOR_ACCEL_MAX = 200.0

TRAJECTORY_CSV_COLUMNS = (
    "t",
    "s_x",
    "s_y",
    "heading",
    "omega0",
    "normal_positive",
    "within_friction_cone",
)


@dataclass(frozen=True)
class DriveSegment:
    """From time ``t`` on, slew the driving speed toward ``target`` at ``|beta|``."""

    t: float
    target: float
    beta: float


class DriveProfile:
    """Piecewise-linear driving speed built from rate-limited segments.

    The speed starts at ``initial_speed`` at ``t_start``. At each segment's
    start time the motor begins moving toward that segment's target at the
    segment's rate and holds once there (or until the next segment starts).
    Angle, speed and acceleration are exact for any query time.
    """

    def __init__(self, segments=(), initial_speed=0.0, t_start=0.0, beta_max=DEFAULT_MOTOR_ACCEL_MAX):
        self.segments = tuple(
            seg if isinstance(seg, DriveSegment) else DriveSegment(float(seg[0]), float(seg[1]), float(seg[2]))
            for seg in segments
        )
        self.initial_speed = float(initial_speed)
        self.t_start = float(t_start)
        self.beta_max = float(beta_max)
        times = [seg.t for seg in self.segments]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise InvalidStateError("drive segment times must be strictly increasing")
        if times and times[0] < self.t_start:
            raise InvalidStateError("first drive segment starts before the profile")
        for seg in self.segments:
            if abs(seg.beta) > self.beta_max:
                raise InvalidStateError(f"segment rate {seg.beta} exceeds limit {self.beta_max}")
        self._build_knots()

    @classmethod
    def constant(cls, omega0, t_start=0.0):
        return cls((), initial_speed=omega0, t_start=t_start)

    @classmethod
    def ramp(cls, omega0, beta, initial_speed=0.0, t_start=0.0, beta_max=None):
        beta_max = max(abs(beta), DEFAULT_MOTOR_ACCEL_MAX) if beta_max is None else beta_max
        return cls([(t_start, omega0, abs(beta))], initial_speed, t_start, beta_max)

    def _build_knots(self):
        # knot k: on [t_k, t_{k+1}) speed = w_k + a_k (t - t_k), angle = ang_k + ...
        knots = [(self.t_start, self.initial_speed, 0.0)]
        bounds = [seg.t for seg in self.segments[1:]] + [math.inf]
        for seg, t_end in zip(self.segments, bounds):
            t0 = seg.t
            w = self._speed_from_knots(knots, t0)
            rate = abs(seg.beta)
            gap = seg.target - w
            if gap == 0.0 or rate == 0.0:
                knots.append((t0, w, 0.0))
                continue
            a = math.copysign(rate, gap)
            t_reach = t0 + abs(gap) / rate
            knots.append((t0, w, a))
            if t_reach < t_end:
                knots.append((t_reach, seg.target, 0.0))
        cleaned = []
        for k in knots:
            if cleaned and k[0] == cleaned[-1][0]:
                cleaned[-1] = k
            else:
                cleaned.append(k)
        self._t = [k[0] for k in cleaned]
        self._w = [k[1] for k in cleaned]
        self._a = [k[2] for k in cleaned]
        angles = [0.0]
        for i in range(1, len(cleaned)):
            d = self._t[i] - self._t[i - 1]
            angles.append(angles[-1] + self._w[i - 1] * d + 0.5 * self._a[i - 1] * d * d)
        self._ang = angles

    @staticmethod
    def _speed_from_knots(knots, t):
        t0, w0, a0 = knots[-1]
        for kt, kw, ka in reversed(knots):
            if kt <= t:
                t0, w0, a0 = kt, kw, ka
                break
        return w0 + a0 * (t - t0)

    def _index(self, t):
        return max(0, bisect.bisect_right(self._t, t) - 1)

    def speed(self, t):
        i = self._index(t)
        return self._w[i] + self._a[i] * (t - self._t[i])

    def accel(self, t):
        return self._a[self._index(t)]

    def angle(self, t):
        """Pendulum rotation accumulated since ``t_start``."""
        i = self._index(t)
        d = t - self._t[i]
        return self._ang[i] + self._w[i] * d + 0.5 * self._a[i] * d * d

    def extended(self, segment):
        """Copy of this profile with one more segment appended."""
        return DriveProfile(
            list(self.segments) + [segment],
            initial_speed=self.initial_speed,
            t_start=self.t_start,
            beta_max=self.beta_max,
        )


def _drive_masses(p, theta, drive, t):
    return (pendulum_kinematics(p, theta, drive.speed(t), drive.accel(t)),)


def _rk4(p, st, drive, t, dt, f_ext):
    c = _kernel.Constants(p)
    f = None if f_ext is None else tuple(float(x) for x in f_ext)
    T, w, s, theta, N = _kernel.rk4(
        c, tuple(np.asarray(st.T, float).ravel()), tuple(np.asarray(st.omega, float)),
        tuple(np.asarray(st.s, float)), float(st.theta), drive, t, dt, f,
    )
    state = ShellState(np.array(T).reshape(3, 3), np.array(w), np.array(s), theta, drive.speed(t + dt))
    return state, classify_contact(N, p.mu)


def _check_dt(dt):
    if not 0.0 < dt <= MAX_DT:
        raise InvalidStateError(f"dt must lie in (0, {MAX_DT}], got {dt}")


def step(p, st, drive, t, dt, f_ext=None, strict=False):
    """Advance ``st`` from ``t`` to ``t + dt``.

    The motor follows ``drive``; damping ``-k0 omega`` and the optional
    constant force ``f_ext`` act on the shell. With ``strict`` a lifted or
    slipping contact at the start of the step raises ContactViolationError.
    """
    _check_dt(dt)
    new, contact = _rk4(p, st, drive, t, dt, f_ext)
    if strict and not contact.ok:
        raise ContactViolationError(f"contact lost or slipping at t={t:.6g}", t=t, report=contact)
    return new


def contact_report(p, st, drive, t, f_ext=None):
    """Ground reaction for a state, using the profile's acceleration at ``t``."""
    masses = _drive_masses(p, st.theta, drive, t)
    omega_dot = angular_acceleration(p, st, masses, f_ext, damping_torque(p, st.omega))
    s_ddot = center_acceleration(p, omega_dot)
    r_ddot = mass_acceleration(omega_dot, np.asarray(st.omega, float), st.T, masses[0])
    return contact_force(p, st, s_ddot, r_ddot, f_ext)


class Trajectory:
    """Uniformly sampled simulation output, stored column-wise."""

    def __init__(self, t, T, omega, s, theta, theta_dot, N, normal_positive, within_cone, R):
        self.t = np.asarray(t, dtype=float)
        self.T = np.asarray(T, dtype=float)
        self.omega = np.asarray(omega, dtype=float)
        self.s = np.asarray(s, dtype=float)
        self.theta = np.asarray(theta, dtype=float)
        self.theta_dot = np.asarray(theta_dot, dtype=float)
        self.N = np.asarray(N, dtype=float)
        self.normal_positive = np.asarray(normal_positive, dtype=bool)
        self.within_cone = np.asarray(within_cone, dtype=bool)
        self.R = float(R)

    def __len__(self):
        return len(self.t)

    def state(self, i):
        return ShellState(self.T[i].copy(), self.omega[i].copy(), self.s[i].copy(), float(self.theta[i]), float(self.theta_dot[i]))

    def contact(self, i):
        return ContactReport(self.N[i].copy(), bool(self.normal_positive[i]), bool(self.within_cone[i]))

    @property
    def final(self):
        return self.state(len(self) - 1)

    @property
    def s_dot(self):
        """Center velocity from the rolling constraint."""
        return self.R * np.cross(self.omega, E_Z)

    @property
    def heading(self):
        """Planar direction of the motor axis, which points away from the revolving center."""
        return np.arctan2(self.T[:, 1, 2], self.T[:, 0, 2])

    @property
    def tilt(self):
        """Angle between the motor axis and the vertical."""
        return np.arccos(np.clip(self.T[:, 2, 2], -1.0, 1.0))

    def slice(self, t_from=None, t_to=None):
        mask = np.ones(len(self), dtype=bool)
        if t_from is not None:
            mask &= self.t >= t_from - 1e-9
        if t_to is not None:
            mask &= self.t <= t_to + 1e-9
        return Trajectory(
            self.t[mask], self.T[mask], self.omega[mask], self.s[mask], self.theta[mask],
            self.theta_dot[mask], self.N[mask], self.normal_positive[mask], self.within_cone[mask], self.R,
        )

    @classmethod
    def concatenate(cls, parts):
        parts = [part for part in parts if len(part)]
        if not parts:
            raise InvalidStateError("nothing to concatenate")
        cols = ("t", "T", "omega", "s", "theta", "theta_dot", "N", "normal_positive", "within_cone")
        merged = {c: np.concatenate([getattr(part, c) for part in parts]) for c in cols}
        return cls(R=parts[0].R, **merged)

    def rows(self):
        heading = self.heading
        for i in range(len(self)):
            yield (
                float(self.t[i]),
                float(self.s[i, 0]),
                float(self.s[i, 1]),
                float(heading[i]),
                float(self.theta_dot[i]),
                int(self.normal_positive[i]),
                int(self.within_cone[i]),
            )

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRAJECTORY_CSV_COLUMNS)
            for row in self.rows():
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row])

    def to_json(self, path=None):
        data = {
            "columns": list(TRAJECTORY_CSV_COLUMNS),
            "R": self.R,
            "rows": [list(r) for r in self.rows()],
        }
        if path is not None:
            with open(path, "w") as fh:
                json.dump(data, fh)
        return data


def simulate(p, st0, drive, duration, dt=DEFAULT_DT, stride=DEFAULT_STRIDE, t0=0.0, f_ext=None, strict=False):
    """Integrate from ``t0`` for ``duration`` seconds, sampling every ``stride``."""
    _check_dt(dt)
    if duration < 0.0:
        raise InvalidStateError(f"duration must be non-negative, got {duration}")
    every = max(1, int(round(stride / dt)))
    n_steps = int(round(duration / dt))
    n_samples = n_steps // every + 1

    t_arr = np.empty(n_samples)
    T_arr = np.empty((n_samples, 3, 3))
    w_arr = np.empty((n_samples, 3))
    s_arr = np.empty((n_samples, 3))
    th_arr = np.empty(n_samples)
    thd_arr = np.empty(n_samples)
    N_arr = np.empty((n_samples, 3))
    pos_arr = np.empty(n_samples, dtype=bool)
    cone_arr = np.empty(n_samples, dtype=bool)

    c = _kernel.Constants(p)
    f = None if f_ext is None else tuple(float(x) for x in f_ext)
    T = tuple(np.asarray(st0.T, dtype=float).ravel())
    w = tuple(np.asarray(st0.omega, dtype=float))
    s = (float(st0.s[0]), float(st0.s[1]), p.R)
    theta = float(st0.theta)

    def record(j, t, N):
        t_arr[j] = t
        T_arr[j] = np.reshape(T, (3, 3))
        w_arr[j] = w
        s_arr[j] = s
        th_arr[j] = theta
        thd_arr[j] = drive.speed(t)
        contact = classify_contact(N, p.mu)
        N_arr[j] = N
        pos_arr[j] = contact.normal_positive
        cone_arr[j] = contact.within_friction_cone
        return contact

    j = 0
    for k in range(n_steps):
        t = t0 + k * dt
        T_next, w_next, s_next, th_next, N = _kernel.rk4(c, T, w, s, theta, drive, t, dt, f)
        if strict or k % every == 0:
            contact = classify_contact(N, p.mu)
            if strict and not contact.ok:
                raise ContactViolationError(f"contact lost or slipping at t={t:.6g}", t=t, report=contact)
        if k % every == 0:
            record(j, t, N)
            j += 1
        T, w, s, theta = T_next, w_next, s_next, th_next
    t_end = t0 + n_steps * dt
    if j < n_samples:
        st = ShellState(np.reshape(T, (3, 3)), np.array(w), np.array(s), theta, drive.speed(t_end))
        contact = contact_report(p, st, drive, t_end, f_ext)
        if strict and not contact.ok:
            raise ContactViolationError(f"contact lost or slipping at t={t_end:.6g}", t=t_end, report=contact)
        record(j, t_end, contact.N)
    return Trajectory(t_arr, T_arr, w_arr, s_arr, th_arr, thd_arr, N_arr, pos_arr, cone_arr, p.R)


def fit_circle(points):
    """Algebraic least-squares circle through points in the z = 0 plane.

    Returns ``(center, radius, residual)`` with ``residual`` the RMS distance
    of the points from the fitted circle.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] < 2:
        raise DegenerateInputError("need at least three planar points")
    xy = pts[:, :2]
    mean = xy.mean(axis=0)
    d = xy - mean
    sv = np.linalg.svd(d, compute_uv=False)
    if sv[0] == 0.0 or sv[1] <= 1e-10 * sv[0]:
        raise DegenerateInputError("points are collinear")
    a = np.column_stack([2.0 * d, np.ones(len(d))])
    b = np.sum(d * d, axis=1)
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    cx, cy, c = sol
    radius = math.sqrt(c + cx * cx + cy * cy)
    center = np.array([cx + mean[0], cy + mean[1], 0.0])
    dist = np.hypot(xy[:, 0] - center[0], xy[:, 1] - center[1])
    residual = float(np.sqrt(np.mean((dist - radius) ** 2)))
    return center, radius, residual


@dataclass(frozen=True)
class CircleFit:
    center: np.ndarray
    radius: float
    residual: float
    Omega: float
    xi: float


def fit_revolution(traj, t_from=None):
    """Fitted circle, revolving rate and mean tilt over the tail of a trajectory."""
    tail = traj.slice(t_from) if t_from is not None else traj
    center, radius, residual = fit_circle(tail.s)
    ang = np.unwrap(np.arctan2(tail.s[:, 1] - center[1], tail.s[:, 0] - center[0]))
    Omega = float(np.polyfit(tail.t, ang, 1)[0])
    return CircleFit(center, radius, residual, Omega, float(np.mean(tail.tilt)))
