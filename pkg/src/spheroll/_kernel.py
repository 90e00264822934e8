"""Scalar RK4 kernel for the single-pendulum robot.

Same equations as :mod:`spheroll.dynamics`, unrolled over plain floats: for
3-vectors the interpreter beats numpy's per-call overhead by a wide margin.
State layout: ``T`` row-major (9), ``omega`` (3), ``s`` (3).
"""

import math

from spheroll.errors import SingularInertiaError


class Constants:
    __slots__ = ("R", "MR2", "I", "a", "cz", "m", "g", "k0", "M_tot", "mu")

    def __init__(self, p):
        self.R = p.R
        self.MR2 = p.M * p.R * p.R
        self.I = p.I
        self.a = p.r0 * math.sin(p.phi)
        self.cz = -p.r0 * math.cos(p.phi)
        self.m = p.m
        self.g = p.g
        self.k0 = p.k0
        self.M_tot = p.M + p.m
        self.mu = p.mu


def rhs(c, T, w, theta, thd, thdd, f):
    """Return ``(T_dot, omega_dot, s_dot, r, h)`` with ``r``/``h`` for contact recovery."""
    t00, t01, t02, t10, t11, t12, t20, t21, t22 = T
    w0, w1, w2 = w
    a = c.a
    cs, sn = math.cos(theta), math.sin(theta)
    # body-frame pendulum position, velocity, acceleration (z parts: cz, 0, 0)
    px, py, pz = a * cs, a * sn, c.cz
    vx, vy = -a * sn * thd, a * cs * thd
    ax = -a * cs * thd * thd - a * sn * thdd
    ay = -a * sn * thd * thd + a * cs * thdd

    r0 = t00 * px + t01 * py + t02 * pz
    r1 = t10 * px + t11 * py + t12 * pz
    r2 = t20 * px + t21 * py + t22 * pz
    v0 = t00 * vx + t01 * vy
    v1 = t10 * vx + t11 * vy
    v2 = t20 * vx + t21 * vy
    q0 = t00 * ax + t01 * ay
    q1 = t10 * ax + t11 * ay
    q2 = t20 * ax + t21 * ay

    # w x r, then w x (w x r)
    c0 = w1 * r2 - w2 * r1
    c1 = w2 * r0 - w0 * r2
    c2 = w0 * r1 - w1 * r0
    h0 = w1 * c2 - w2 * c1 + 2.0 * (w1 * v2 - w2 * v1) + q0
    h1 = w2 * c0 - w0 * c2 + 2.0 * (w2 * v0 - w0 * v2) + q1
    h2 = w0 * c1 - w1 * c0 + 2.0 * (w0 * v1 - w1 * v0) + q2

    u0, u1, u2 = r0, r1, r2 + c.R
    m = c.m
    uu = u0 * u0 + u1 * u1 + u2 * u2
    a00 = m * (uu - u0 * u0) + c.MR2 + c.I
    a11 = m * (uu - u1 * u1) + c.MR2 + c.I
    a22 = m * (uu - u2 * u2) + c.I
    a01 = -m * u0 * u1
    a02 = -m * u0 * u2
    a12 = -m * u1 * u2

    # m u x (-h - g z) + R z x f - k0 w
    e0, e1, e2 = -h0, -h1, -h2 - c.g
    b0 = m * (u1 * e2 - u2 * e1) - c.k0 * w0
    b1 = m * (u2 * e0 - u0 * e2) - c.k0 * w1
    b2 = m * (u0 * e1 - u1 * e0) - c.k0 * w2
    if f is not None:
        b0 -= c.R * f[1]
        b1 += c.R * f[0]

    # symmetric adjugate solve
    m00 = a11 * a22 - a12 * a12
    m01 = a02 * a12 - a01 * a22
    m02 = a01 * a12 - a02 * a11
    m11 = a00 * a22 - a02 * a02
    m12 = a01 * a02 - a00 * a12
    m22 = a00 * a11 - a01 * a01
    det = a00 * m00 + a01 * m01 + a02 * m02
    if not det > 0.0:
        raise SingularInertiaError(f"inertia operator not positive definite (det={det:g})")
    inv = 1.0 / det
    d0 = (m00 * b0 + m01 * b1 + m02 * b2) * inv
    d1 = (m01 * b0 + m11 * b1 + m12 * b2) * inv
    d2 = (m02 * b0 + m12 * b1 + m22 * b2) * inv

    Td = (
        -w2 * t10 + w1 * t20, -w2 * t11 + w1 * t21, -w2 * t12 + w1 * t22,
        w2 * t00 - w0 * t20, w2 * t01 - w0 * t21, w2 * t02 - w0 * t22,
        -w1 * t00 + w0 * t10, -w1 * t01 + w0 * t11, -w1 * t02 + w0 * t12,
    )
    sd = (c.R * w1, -c.R * w0, 0.0)
    return Td, (d0, d1, d2), sd, (r0, r1, r2), (h0, h1, h2)


def contact_force(c, wd, r, h, f):
    """Ground reaction from the accelerations of one RHS evaluation."""
    d0, d1, d2 = wd
    # s_ddot = R wd x z, r_ddot = wd x r + h
    sx, sy = c.R * d1, -c.R * d0
    rx = d1 * r[2] - d2 * r[1] + h[0]
    ry = d2 * r[0] - d0 * r[2] + h[1]
    rz = d0 * r[1] - d1 * r[0] + h[2]
    n0 = c.M_tot * sx + c.m * rx
    n1 = c.M_tot * sy + c.m * ry
    n2 = c.m * rz + c.M_tot * c.g
    if f is not None:
        n0 -= f[0]
        n1 -= f[1]
        n2 -= f[2]
    return n0, n1, n2


def _refine(T):
    # Q <- Q - 0.5 (Q Q^T - I) Q
    t00, t01, t02, t10, t11, t12, t20, t21, t22 = T
    p00 = t00 * t00 + t01 * t01 + t02 * t02 - 1.0
    p11 = t10 * t10 + t11 * t11 + t12 * t12 - 1.0
    p22 = t20 * t20 + t21 * t21 + t22 * t22 - 1.0
    p01 = t00 * t10 + t01 * t11 + t02 * t12
    p02 = t00 * t20 + t01 * t21 + t02 * t22
    p12 = t10 * t20 + t11 * t21 + t12 * t22
    return (
        t00 - 0.5 * (p00 * t00 + p01 * t10 + p02 * t20),
        t01 - 0.5 * (p00 * t01 + p01 * t11 + p02 * t21),
        t02 - 0.5 * (p00 * t02 + p01 * t12 + p02 * t22),
        t10 - 0.5 * (p01 * t00 + p11 * t10 + p12 * t20),
        t11 - 0.5 * (p01 * t01 + p11 * t11 + p12 * t21),
        t12 - 0.5 * (p01 * t02 + p11 * t12 + p12 * t22),
        t20 - 0.5 * (p02 * t00 + p12 * t10 + p22 * t20),
        t21 - 0.5 * (p02 * t01 + p12 * t11 + p22 * t21),
        t22 - 0.5 * (p02 * t02 + p12 * t12 + p22 * t22),
    )


def rk4(c, T, w, s, theta, drive, t, dt, f):
    """One RK4 step; also returns the ground reaction at the start state."""
    base = drive.angle(t)
    h = 0.5 * dt
    tm = t + h
    te = t + dt
    th_m = theta + drive.angle(tm) - base
    th_e = theta + drive.angle(te) - base
    spd_m = drive.speed(tm)
    acc_m = drive.accel(tm)
    # left limit of the profile acceleration at the end of the step
    acc_e = drive.accel(te - 1e-12 * max(1.0, abs(te)))

    T1, W1, S1, r_start, h_start = rhs(c, T, w, theta, drive.speed(t), drive.accel(t), f)
    T2, W2, S2, _, _ = rhs(
        c, [x + h * k for x, k in zip(T, T1)], [x + h * k for x, k in zip(w, W1)], th_m, spd_m, acc_m, f
    )
    T3, W3, S3, _, _ = rhs(
        c, [x + h * k for x, k in zip(T, T2)], [x + h * k for x, k in zip(w, W2)], th_m, spd_m, acc_m, f
    )
    T4, W4, S4, _, _ = rhs(
        c, [x + dt * k for x, k in zip(T, T3)], [x + dt * k for x, k in zip(w, W3)], th_e, drive.speed(te), acc_e, f
    )
    k = dt / 6.0
    T_new = _refine(tuple(x + k * (a + 2.0 * b + 2.0 * cc + d) for x, a, b, cc, d in zip(T, T1, T2, T3, T4)))
    w_new = tuple(x + k * (a + 2.0 * b + 2.0 * cc + d) for x, a, b, cc, d in zip(w, W1, W2, W3, W4))
    s_new = (
        s[0] + k * (S1[0] + 2.0 * S2[0] + 2.0 * S3[0] + S4[0]),
        s[1] + k * (S1[1] + 2.0 * S2[1] + 2.0 * S3[1] + S4[1]),
        s[2],
    )
    N = contact_force(c, W1, r_start, h_start, f)
    return T_new, w_new, s_new, th_e, N
