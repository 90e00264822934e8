"""Equations of motion of a rolling shell driven by internal point masses.

The shell (radius ``R``, mass ``M``, isotropic inertia ``I``) rolls without
slipping on the plane ``z = 0``. Internal point masses move along prescribed
body-frame paths. Eliminating the internal force and the ground reaction by
taking moments about the contact point leaves a 3x3 linear system for the
shell's angular acceleration::

    [sum_q m_q (|u_q|^2 I3 - u_q u_q^T) + M R^2 (I3 - z z^T) + I I3] omega_dot
        = sum_q m_q u_q x (-h_q - g z) + R z x f + tau

with ``u_q`` the vector from the contact point to mass ``q`` and ``h_q`` the
part of its acceleration that does not depend on ``omega_dot``.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from spheroll.errors import InvalidParamsError, SingularInertiaError
from spheroll.spatial import E_Z, I3, cross

CONDITION_LIMIT = 1e12

_DEFAULT_R = 0.12
_DEFAULT_M_SHELL = 0.840


@dataclass(frozen=True)
class RobotParams:
    """Physical constants of the robot. Defaults are the built prototype's.

    Attributes:
        R: outer shell radius [m]
        M_shell: shell mass, without the damping beads [kg]
        I: shell moment of inertia about any axis through its center [kg m^2]
        phi: angle between the pendulum arm and the motor axis [rad]
        r0: distance from shell center to the pendulum mass [m]
        m: pendulum mass [kg]
        m_b: mass of the loose beads, lumped into the shell [kg]
        k0: linear damping coefficient on the shell's angular velocity [kg m^2/s]
        mu: ground friction coefficient, only used to flag slipping [-]
        g: gravitational acceleration [m/s^2]
    """

    R: float = _DEFAULT_R
    M_shell: float = _DEFAULT_M_SHELL
    I: float = 0.0053
    phi: float = math.pi / 4
    r0: float = 0.093
    m: float = 0.306
    m_b: float = 0.040
    k0: float = 0.4 * _DEFAULT_M_SHELL * _DEFAULT_R**2
    mu: float = 0.8
    g: float = 9.81

    def __post_init__(self):
        self.validate()

    @property
    def M(self):
        """Mass carried rigidly by the shell (shell plus beads)."""
        return self.M_shell + self.m_b

    def validate(self):
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for name, value in values.items():
            if not math.isfinite(value):
                raise InvalidParamsError(f"{name} must be finite, got {value}")
        for name in ("R", "M_shell", "I", "r0", "m", "g"):
            if values[name] <= 0.0:
                raise InvalidParamsError(f"{name} must be positive, got {values[name]}")
        for name in ("m_b", "k0", "mu"):
            if values[name] < 0.0:
                raise InvalidParamsError(f"{name} must be non-negative, got {values[name]}")
        if self.r0 >= self.R:
            raise InvalidParamsError(f"r0={self.r0} must be smaller than R={self.R}")
        if not 0.0 < self.phi < math.pi / 2:
            raise InvalidParamsError(f"phi={self.phi} must lie in (0, pi/2)")

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class ShellState:
    """Full simulation state.

    ``T`` maps body coordinates to ground coordinates, ``omega`` is the shell's
    angular velocity in ground coordinates and ``s`` the shell center
    (``s[2] == R`` while rolling on the floor). ``theta`` is the pendulum
    angle around the body z axis (the motor axis) and ``theta_dot`` the
    driving speed.
    """

    T: np.ndarray
    omega: np.ndarray
    s: np.ndarray
    theta: float = 0.0
    theta_dot: float = 0.0

    @classmethod
    def at_rest(cls, p, T=None, position=(0.0, 0.0), theta=0.0):
        T = np.eye(3) if T is None else np.array(T, dtype=float)
        return cls(T, np.zeros(3), np.array([position[0], position[1], p.R]), theta, 0.0)

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class MassKinematics:
    """Body-frame position, velocity and acceleration of one internal point mass."""

    r_body: np.ndarray
    r_body_dot: np.ndarray
    r_body_ddot: np.ndarray
    mass: float

    def __post_init__(self):
        if not self.mass > 0.0:
            raise InvalidParamsError(f"point mass must be positive, got {self.mass}")


@dataclass(frozen=True)
class ContactReport:
    N: np.ndarray = field(default_factory=lambda: np.zeros(3))
    normal_positive: bool = True
    within_friction_cone: bool = True

    @property
    def ok(self):
        return self.normal_positive and self.within_friction_cone


def pendulum_kinematics(p, theta, theta_dot, theta_ddot):
    """Point mass on a cone of half-angle phi around the body z axis."""
    a = p.r0 * math.sin(p.phi)
    c, s = math.cos(theta), math.sin(theta)
    r = np.array([a * c, a * s, -p.r0 * math.cos(p.phi)])
    r_dot = np.array([-a * s * theta_dot, a * c * theta_dot, 0.0])
    r_ddot = np.array(
        [
            -a * c * theta_dot**2 - a * s * theta_ddot,
            -a * s * theta_dot**2 + a * c * theta_ddot,
            0.0,
        ]
    )
    return MassKinematics(r, r_dot, r_ddot, p.m)


def inertial_term_h(omega, T, mk):
    """Mass acceleration relative to the shell center, minus the omega_dot part."""
    r = T @ mk.r_body
    return cross(omega, cross(omega, r)) + 2.0 * cross(omega, T @ mk.r_body_dot) + T @ mk.r_body_ddot


def solve3(a, b):
    """Solve a 3x3 system through the adjugate; refuses ill-conditioned matrices."""
    c00 = a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    c01 = a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]
    c02 = a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]
    det = a[0, 0] * c00 + a[0, 1] * c01 + a[0, 2] * c02
    adj = np.array(
        [
            [c00, a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2], a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]],
            [c01, a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0], a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]],
            [c02, a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1], a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]],
        ]
    )
    norm_a = math.sqrt(float(np.sum(a * a)))
    norm_adj = math.sqrt(float(np.sum(adj * adj)))
    if det == 0.0 or norm_a * norm_adj > CONDITION_LIMIT * abs(det):
        raise SingularInertiaError(f"inertia operator is singular or ill-conditioned (det={det:g})")
    return (adj @ b) / det


def inertia_operator(p, T, masses):
    """Moment of inertia of the whole robot about the instantaneous contact point."""
    op = p.M * p.R**2 * (I3 - np.outer(E_Z, E_Z)) + p.I * I3
    for mk in masses:
        u = p.R * E_Z + T @ mk.r_body
        op = op + mk.mass * ((u @ u) * I3 - np.outer(u, u))
    return op


def contact_torque(p, T, omega, masses, f_ext=None, tau_ext=None):
    """Right-hand side: moments about the contact point, excluding omega_dot terms."""
    g_z = np.array([0.0, 0.0, p.g])
    torque = np.zeros(3)
    for mk in masses:
        u = p.R * E_Z + T @ mk.r_body
        torque = torque + mk.mass * cross(u, -inertial_term_h(omega, T, mk) - g_z)
    if f_ext is not None:
        torque = torque + p.R * cross(E_Z, f_ext)
    if tau_ext is not None:
        torque = torque + tau_ext
    return torque


def _omega_dot(p, T, omega, masses, f_ext=None, tau_ext=None):
    return solve3(inertia_operator(p, T, masses), contact_torque(p, T, omega, masses, f_ext, tau_ext))


def angular_acceleration(p, st, masses, f_ext=None, tau_ext=None):
    """Angular acceleration of the shell (ground frame) for the given state.

    Damping is not included; pass ``tau_ext=-p.k0 * st.omega`` to apply it.
    """
    return _omega_dot(p, st.T, st.omega, masses, f_ext, tau_ext)


def damping_torque(p, omega):
    return -p.k0 * np.asarray(omega, dtype=float)


def center_acceleration(p, omega_dot):
    """Shell-center acceleration implied by rolling without slipping."""
    return p.R * cross(omega_dot, E_Z)


def mass_acceleration(omega_dot, omega, T, mk):
    """Acceleration of a point mass relative to the shell center, ground frame."""
    return cross(omega_dot, T @ mk.r_body) + inertial_term_h(omega, T, mk)


def contact_force(p, st, s_ddot, r_ddot_ground, f_ext=None):
    """Ground reaction (normal plus friction) and the no-lift / no-slip flags."""
    total = p.M + p.m
    N = total * np.asarray(s_ddot) + p.m * np.asarray(r_ddot_ground) + total * p.g * E_Z
    if f_ext is not None:
        N = N - f_ext
    return classify_contact(N, p.mu)


def classify_contact(N, mu):
    N = np.asarray(N, dtype=float)
    n_z = float(N[2])
    norm = math.sqrt(float(N @ N))
    normal_positive = n_z > 0.0
    # compare squared quantities to avoid the sqrt on the cone boundary
    within = normal_positive and n_z * n_z * (1.0 + mu * mu) >= norm * norm * (1.0 - 1e-15)
    return ContactReport(N, normal_positive, bool(within))
