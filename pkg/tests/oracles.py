"""Independent reference computations shared by the unit and acceptance tests."""

import math

import numpy as np

from spheroll import _kernel, quasistatic, stability
from spheroll.dynamics import pendulum_kinematics
from spheroll.integrator import DriveProfile, simulate
from spheroll.spatial import E_Z, skew


def newton_euler(p, T, omega, theta, thd, thdd, f=np.zeros(3)):
    """Independent route: solve for (omega_dot, N, F) from force and moment balances.

    Unknowns: shell angular acceleration, ground reaction N, and the force F the
    shell exerts on the pendulum mass. Moments are taken about the shell center.
    """
    mk = pendulum_kinematics(p, theta, thd, thdd)
    r = T @ mk.r_body
    v = T @ mk.r_body_dot
    a = T @ mk.r_body_ddot
    h = np.cross(omega, np.cross(omega, r)) + 2 * np.cross(omega, v) + a
    g = np.array([0.0, 0.0, p.g])
    # s_ddot = R wd x z = -R [z]x wd
    S = -p.R * skew(E_Z)
    A = np.zeros((9, 9))
    b = np.zeros(9)
    # mass: m (s_ddot + wd x r + h) = F - m g
    A[0:3, 0:3] = p.m * (S - skew(r))
    A[0:3, 6:9] = -np.eye(3)
    b[0:3] = -p.m * h - p.m * g
    # shell translation: M s_ddot = N - M g - F + f
    A[3:6, 0:3] = p.M * S
    A[3:6, 3:6] = -np.eye(3)
    A[3:6, 6:9] = np.eye(3)
    b[3:6] = -p.M * g + f
    # shell rotation about its center: I wd = (-R z) x N + r x (-F) - k0 w
    A[6:9, 0:3] = p.I * np.eye(3)
    A[6:9, 3:6] = p.R * skew(E_Z)
    A[6:9, 6:9] = skew(r)
    b[6:9] = -p.k0 * omega
    x = np.linalg.solve(A, b)
    return x[0:3], x[3:6]


def no_slip_residual(p, traj):
    """Largest violation of ``s_z = R`` and ``s_dot = omega x R z`` over the samples."""
    c = _kernel.Constants(p)
    worst = float(np.max(np.abs(traj.s[:, 2] - p.R)))
    for i in range(len(traj)):
        _, _, sd, _, _ = _kernel.rhs(c, tuple(traj.T[i].ravel()), tuple(traj.omega[i]), traj.theta[i], traj.theta_dot[i], 0.0, None)
        worst = max(worst, float(np.max(np.abs(np.array(sd) - np.cross(traj.omega[i], p.R * E_Z)))))
    return worst


def richardson_ratio(p, st0, drive, duration, dts):
    def final(dt):
        f = simulate(p, st0, drive, duration, dt, duration).final
        return np.concatenate([f.T.ravel(), f.omega, f.s[:2]])

    a, b, c = (final(dt) for dt in dts)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b - c))


def measure_decay(p, omega0, amplitude=1e-3, duration=30.0):
    """Returns ``(predicted eigenvalue, simulated decay rate, simulated angular frequency)``."""
    qs = quasistatic.solve(p, omega0)
    rep = stability.analyze(p, qs)
    jac = stability.linearize(p, qs)
    lam = rep.dominant
    vals, vecs = np.linalg.eig(jac)
    v = np.real(vecs[:, np.argmin(np.abs(vals - lam))])
    x = amplitude * v / np.linalg.norm(v[:3])
    st0 = stability.perturbed_state(p, qs, x[:3], x[3:])
    traj = simulate(p, st0, DriveProfile.constant(omega0), duration, 1e-3, 0.005)
    y = np.array([stability.orientation_offset(qs, traj.state(i), traj.t[i])[0] for i in range(len(traj))])
    peaks = [i for i in range(1, len(y) - 1) if y[i] > y[i - 1] and y[i] >= y[i + 1] and y[i] > 0]
    tp, yp = traj.t[peaks], y[peaks]
    rate = float(np.polyfit(tp, np.log(yp), 1)[0])
    freq = 2.0 * math.pi / float(np.mean(np.diff(tp)))
    return lam, rate, freq
