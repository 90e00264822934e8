"""Steering by moving the center of curvature.

At constant driving speed the robot circles a fixed center ``o``. Changing
the speed changes the radius, which slides ``o`` along the line from the
shell to the center; waiting for the robot to come round lets the
controller push ``o`` in any planar direction. Each control step:

1. estimate ``o = s - R0(omega0) e`` with ``e = (cos gamma, sin gamma, 0)``,
2. project the center error onto ``e``: ``err = (o_g - o) . e``,
3. ask for a radius rate ``v_R = -PID(err) + k_r (R_g - R0)``,
4. turn it into a speed rate ``beta = v_R / (dR0/domega0)`` and apply the
   acceleration and radius limits.

The ``k_r`` term settles the radius on the target once the center has
arrived; without it any radius around ``o_g`` would be an equilibrium.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from spheroll.errors import InfeasibleSpeedError, InvalidStateError, OutOfRangeError, StalePoseError
from spheroll.quasistatic import radius_slope
from spheroll.spatial import wrap_angle

MIN_SLOPE = 1e-3
DEFAULT_STOP_DT = 0.15
# small stop circles settle closest to the target after the motor is cut
DEFAULT_STOP_RADIUS = 0.20


@dataclass(frozen=True)
class Pose:
    s: np.ndarray
    gamma: float
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gamma", wrap_angle(float(self.gamma)))


@dataclass(frozen=True)
class Gains:
    k_p: float = 0.5
    k_i: float = 0.05
    k_d: float = 0.1
    k_r: float = 0.2
    # integrate only near the target so the approach does not wind it up
    i_band: float = 0.1


@dataclass(frozen=True)
class Limits:
    R_min: float = 0.12
    R_max: float = 1.28
    beta_max: float = 0.5
    stale_after: float = 0.5
    # below this speed the robot barely revolves and the center cannot be steered
    omega0_min: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.R_min < self.R_max:
            raise InvalidStateError(f"need 0 < R_min < R_max, got {self.R_min}, {self.R_max}")
        if not self.beta_max > 0.0:
            raise InvalidStateError("beta_max must be positive")


@dataclass(frozen=True)
class ControllerState:
    o: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega0_cmd: float = 0.0
    integral: float = 0.0
    last_error: float = None
    last_t: float = None
    gains: Gains = Gains()
    limits: Limits = Limits()
    clamped: bool = False
    error: float = 0.0

    def reset(self, omega0_cmd=None):
        """Fresh PID memory, keeping gains and limits."""
        return ControllerState(
            omega0_cmd=self.omega0_cmd if omega0_cmd is None else omega0_cmd,
            gains=self.gains,
            limits=self.limits,
        )


@dataclass(frozen=True)
class WaypointTask:
    """Target circle (center ``o_g``, radius ``R_g``) plus the point to pass or stop at."""

    s_g: np.ndarray
    o_g: np.ndarray
    R_g: float
    s_dot_g: np.ndarray = None
    stop: bool = False
    omega0_g: float = math.nan

    @classmethod
    def circle(cls, center, R_g, table=None):
        center = np.array([center[0], center[1], 0.0], dtype=float)
        omega0_g = table.omega0_for_radius(R_g) if table is not None else math.nan
        return cls(center + np.array([R_g, 0.0, 0.0]), center, float(R_g), None, False, omega0_g)

    @property
    def gamma_g(self):
        """Heading of the target point as seen from the target center."""
        d = self.s_g - self.o_g
        return math.atan2(d[1], d[0])


def heading_unit(gamma):
    return np.array([math.cos(gamma), math.sin(gamma), 0.0])


def estimate_center(pose, R0):
    if not R0 > 0.0:
        raise InvalidStateError(f"R0 must be positive, got {R0}")
    s = np.asarray(pose.s, dtype=float)
    o = s - R0 * heading_unit(pose.gamma)
    o[2] = s[2]
    return o


def speed_bounds(table, limits):
    """Driving-speed interval whose steady radius lies within the limits."""
    lo_R, hi_R = table.R0[0], table.R0[-1]
    w_lo = table.omega0_for_radius(max(limits.R_min, lo_R)) if limits.R_min > lo_R else table.omega0_range[0]
    w_hi = table.omega0_for_radius(min(limits.R_max, hi_R)) if limits.R_max < hi_R else table.omega0_range[1]
    return max(w_lo, min(limits.omega0_min, w_hi)), w_hi


def control_step(cs, pose, task, dt, table):
    """One controller update. Returns ``(new_state, omega0_cmd)``."""
    if not dt > 0.0:
        raise InvalidStateError(f"dt must be positive, got {dt}")
    if cs.last_t is not None and pose.t - cs.last_t > cs.limits.stale_after:
        raise StalePoseError(f"pose gap {pose.t - cs.last_t:.3f} s exceeds {cs.limits.stale_after} s")
    g, lim = cs.gains, cs.limits
    w = cs.omega0_cmd
    R0 = table.R0_at(w)
    o = estimate_center(pose, R0)
    e_hat = heading_unit(pose.gamma)
    o_g = np.array([task.o_g[0], task.o_g[1], o[2]])
    err = float((o_g - o) @ e_hat)
    err_rate = 0.0 if cs.last_error is None else (err - cs.last_error) / dt
    integral = cs.integral + err * dt if abs(err) < g.i_band else cs.integral

    v_R = -(g.k_p * err + g.k_i * integral + g.k_d * err_rate) + g.k_r * (task.R_g - R0)
    slope = max(radius_slope(table, w), MIN_SLOPE)
    beta = v_R / slope
    beta_c = min(lim.beta_max, max(-lim.beta_max, beta))
    w_lo, w_hi = speed_bounds(table, lim)
    w_new = w + beta_c * dt
    step = lim.beta_max * dt
    # outside the bounds the command moves back at no more than the rate limit
    if w_new < w_lo:
        w_new_c = min(w_lo, w + step)
    elif w_new > w_hi:
        w_new_c = max(w_hi, w - step)
    else:
        w_new_c = w_new
    clamped = beta_c != beta or w_new_c != w_new
    if clamped:
        # anti-windup: hold the accumulator while saturated
        integral = cs.integral
    new = replace(
        cs, o=o, omega0_cmd=w_new_c, integral=integral, last_error=err, last_t=pose.t, clamped=clamped, error=err
    )
    return new, w_new_c


def plan_waypoint(s_g, s_dot_g, table, limits=Limits(), approach_from=None, stop_radius=DEFAULT_STOP_RADIUS):
    """Target circle that passes ``s_g`` with velocity ``s_dot_g``, counterclockwise.

    ``s_dot_g=None`` (or the string ``"stop"``) asks to stop at ``s_g``: the
    circle then has radius ``stop_radius`` and is placed so the robot
    arrives heading along the approach line from ``approach_from``.
    """
    s_g = np.array([s_g[0], s_g[1], 0.0], dtype=float)
    stop = s_dot_g is None or (isinstance(s_dot_g, str) and s_dot_g == "stop")
    if stop:
        R_g = float(stop_radius)
        if approach_from is None:
            direction = np.array([1.0, 0.0, 0.0])
        else:
            direction = s_g - np.array([approach_from[0], approach_from[1], 0.0])
            if np.linalg.norm(direction) == 0.0:
                direction = np.array([1.0, 0.0, 0.0])
        velocity = None
    else:
        velocity = np.array([s_dot_g[0], s_dot_g[1], 0.0], dtype=float)
        speed = float(np.linalg.norm(velocity))
        try:
            w = table.omega0_for_speed(speed)
        except OutOfRangeError as exc:
            raise InfeasibleSpeedError(f"crossing speed {speed} m/s is not reachable: {exc}") from exc
        R_g = table.R0_at(w)
        direction = velocity
    if not limits.R_min - 1e-12 <= R_g <= limits.R_max + 1e-12:
        raise InfeasibleSpeedError(f"target radius {R_g:.3f} m outside [{limits.R_min}, {limits.R_max}]")
    d = direction / np.linalg.norm(direction)
    left = np.array([-d[1], d[0], 0.0])
    o_g = s_g + R_g * left
    omega0_g = table.omega0_for_radius(R_g)
    return WaypointTask(s_g, o_g, R_g, velocity, stop, omega0_g)


def time_to_target(pose, task, Omega):
    """Seconds until the robot, circling ``o_g`` at rate ``Omega``, passes ``s_g``."""
    if Omega == 0.0:
        return math.inf
    d = np.asarray(pose.s, dtype=float) - task.o_g
    now = math.atan2(d[1], d[0])
    ahead = (task.gamma_g - now) % (2.0 * math.pi) if Omega > 0 else (now - task.gamma_g) % (2.0 * math.pi)
    if ahead > 2.0 * math.pi - 1e-12:
        ahead = 0.0
    return ahead / abs(Omega)


def stop_trigger(pose, task, qs, dt_stop=DEFAULT_STOP_DT):
    """True once the predicted arc time to ``s_g`` drops to ``dt_stop``."""
    return time_to_target(pose, task, qs.Omega) <= dt_stop
