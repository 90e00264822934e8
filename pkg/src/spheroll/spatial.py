"""Three-dimensional vector and rotation helpers.

Vectors are float arrays of shape ``(3,)`` and matrices of shape ``(3, 3)``.
Every function returns a fresh array and never mutates its arguments.
"""

import math

import numpy as np

from spheroll.errors import DegenerateInputError

ROTATION_TOL = 1e-9
ORTHO_TOL = 1e-12
NEAR_ROTATION_TOL = 1e-3

E_X = np.array([1.0, 0.0, 0.0])
E_Y = np.array([0.0, 1.0, 0.0])
E_Z = np.array([0.0, 0.0, 1.0])
I3 = np.eye(3)


def vec3(x, y=None, z=None):
    if y is None:
        out = np.array(x, dtype=float).reshape(3)
    else:
        out = np.array([x, y, z], dtype=float)
    return out


def cross(a, b):
    # np.cross carries heavy dispatch overhead for single 3-vectors
    a0, a1, a2 = a
    b0, b1, b2 = b
    return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])


def skew(v):
    """Matrix ``S`` with ``S @ w == v x w``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_y(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def is_rotation(m, tol=ROTATION_TOL):
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return False
    return (
        np.linalg.norm(m.T @ m - I3) <= tol
        and abs(np.linalg.det(m) - 1.0) <= tol
    )


def orthonormalize(m):
    """Nearest rotation matrix in the Frobenius sense (polar factor).

    Raises DegenerateInputError for rank-deficient input or input whose polar
    factor is a reflection.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        raise DegenerateInputError("expected a finite 3x3 matrix")
    u, sv, vt = np.linalg.svd(m)
    if sv[-1] <= 1e-12 * max(sv[0], 1.0):
        raise DegenerateInputError(f"matrix is rank deficient (singular values {sv})")
    q = u @ vt
    if np.linalg.det(q) < 0.0:
        raise DegenerateInputError("matrix is closer to a reflection than to a rotation")
    return q


def exp_so3(v):
    """Rotation by angle ``|v|`` about ``v`` (Rodrigues)."""
    v = np.asarray(v, dtype=float)
    angle = math.sqrt(v @ v)
    k = skew(v)
    if angle < 1e-8:
        return I3 + k + 0.5 * (k @ k)
    return I3 + (math.sin(angle) / angle) * k + ((1.0 - math.cos(angle)) / angle**2) * (k @ k)


def log_so3(r):
    """Rotation vector of a rotation matrix; inverse of :func:`exp_so3` for angles below pi."""
    r = np.asarray(r, dtype=float)
    cos_a = min(1.0, max(-1.0, 0.5 * (np.trace(r) - 1.0)))
    angle = math.acos(cos_a)
    w = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if angle < 1e-8:
        return 0.5 * w
    return (angle / (2.0 * math.sin(angle))) * w


def wrap_angle(a):
    """Map an angle to (-pi, pi]."""
    out = math.remainder(a, 2.0 * math.pi)
    if out == -math.pi:
        out = math.pi
    return out
