"""Plant-in-the-loop runner: simulated robot, pose feed and controller."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from spheroll.controller import (
    ControllerState,
    Gains,
    Limits,
    Pose,
    control_step,
    time_to_target,
)
from spheroll.dynamics import ShellState
from spheroll.integrator import DEFAULT_DT, DriveProfile, Trajectory, simulate

CONTROL_LOG_COLUMNS = ("t", "s_x", "s_y", "o_x", "o_y", "og_x", "og_y", "omega0_cmd", "e")


@dataclass(frozen=True)
class LoopSettings:
    dt: float = DEFAULT_DT
    control_rate: float = 20.0
    stride: float = 0.05
    stop_dt: float = 0.15
    stop_decel: float = 20.0
    settle_time: float = 10.0
    capture_tol: float = 0.03
    capture_hold: float = 5.0
    pose_noise: float = 0.0
    slope_force: tuple = (0.0, 0.0, 0.0)

    @property
    def period(self):
        return 1.0 / self.control_rate


def motor_heading(T):
    """Planar direction of the motor axis; points from the revolving center to the shell."""
    return math.atan2(T[1, 2], T[0, 2])


class ClosedLoop:
    """Runs the controller against the simulated robot, one control period at a time."""

    def __init__(self, p, table, gains=Gains(), limits=Limits(), settings=LoopSettings(), st0=None, seed=None, strict=False):
        self.p = p
        self.table = table
        self.settings = settings
        self.strict = strict
        self.st = st0 if st0 is not None else ShellState.at_rest(p)
        self.t = 0.0
        self.cs = ControllerState(omega0_cmd=float(self.st.theta_dot), gains=gains, limits=limits)
        self.rng = np.random.default_rng(seed)
        force = np.asarray(settings.slope_force, dtype=float)
        self.f_ext = force if np.any(force != 0.0) else None
        self.parts = []
        self.log = []

    def pose(self):
        s = np.array(self.st.s, dtype=float)
        gamma = motor_heading(self.st.T)
        if self.settings.pose_noise > 0.0:
            s[:2] += self.rng.normal(0.0, self.settings.pose_noise, 2)
            gamma += self.rng.normal(0.0, self.settings.pose_noise / max(self.p.R, 1e-9))
        return Pose(s, gamma, self.t)

    def _advance(self, target, rate, duration):
        w_now = float(self.st.theta_dot)
        if rate > 0.0 and target != w_now:
            drive = DriveProfile([(self.t, target, rate)], w_now, self.t, beta_max=max(rate, self.settings.stop_decel))
        else:
            drive = DriveProfile.constant(w_now, self.t)
        traj = simulate(
            self.p, self.st, drive, duration, self.settings.dt, self.settings.stride, self.t, self.f_ext, self.strict
        )
        n_steps = int(round(duration / self.settings.dt))
        self.st = _final_state(self.p, self.st, drive, self.t, n_steps, self.settings.dt, self.f_ext, traj)
        if self.parts:
            # the first sample repeats the end of the previous chunk
            traj = traj.slice(t_from=self.t + 0.5 * self.settings.dt)
        self.parts.append(traj)
        self.t += n_steps * self.settings.dt

    def control(self, task):
        period = self.settings.period
        pose = self.pose()
        self.cs, w_cmd = control_step(self.cs, pose, task, period, self.table)
        rate = abs(w_cmd - self.st.theta_dot) / period
        self._advance(w_cmd, rate, period)
        self.log.append((pose.t, pose.s[0], pose.s[1], self.cs.o[0], self.cs.o[1], task.o_g[0], task.o_g[1], w_cmd, self.cs.error))
        return w_cmd

    def run_task(self, task, duration):
        end = self.t + duration
        while self.t < end - 1e-9:
            self.control(task)

    def hold(self, duration):
        """Keep the current driving speed without feedback."""
        self._advance(self.st.theta_dot, 0.0, duration)

    def stop_motor(self):
        """Brake the motor to zero at the configured rate and let the robot settle."""
        self._advance(0.0, self.settings.stop_decel, self.settings.settle_time)
        self.cs = self.cs.reset(omega0_cmd=0.0)

    def approach_and_stop(self, task, timeout):
        """Circle ``task`` until captured, then cut the motor just before ``s_g``.

        Returns ``(stopped, stop_time)``.
        """
        s = self.settings
        captured_since = None
        end = self.t + timeout
        while self.t < end:
            self.control(task)
            pose = self.pose()
            dist = float(np.hypot(*(pose.s[:2] - task.o_g[:2])))
            center_err = float(np.hypot(*(self.cs.o[:2] - task.o_g[:2])))
            ok = abs(dist - task.R_g) < s.capture_tol and center_err < s.capture_tol
            if not ok:
                captured_since = None
                continue
            if captured_since is None:
                captured_since = self.t
            if self.t - captured_since < s.capture_hold:
                continue
            Omega = self.table.Omega_at(self.cs.omega0_cmd)
            if time_to_target(pose, task, Omega) <= s.stop_dt:
                t_stop = self.t
                self.stop_motor()
                return True, t_stop
        return False, None

    def trajectory(self):
        return Trajectory.concatenate(self.parts)

    def write_log(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CONTROL_LOG_COLUMNS)
            for row in self.log:
                writer.writerow([repr(float(v)) for v in row])


def _final_state(p, st, drive, t0, n_steps, dt, f_ext, traj):
    # the trajectory's last sample sits exactly at the end of the horizon
    last = traj.state(len(traj) - 1)
    if abs(traj.t[-1] - (t0 + n_steps * dt)) < 1e-9:
        return last
    return simulate(p, st, drive, n_steps * dt, dt, n_steps * dt, t0, f_ext).final
