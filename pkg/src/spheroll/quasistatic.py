"""Steady revolving states at constant driving speed.

At constant motor speed ``omega0`` the robot settles into a motion that is
stationary in a frame turning at ``Omega`` about a vertical axis. At ``t = 0``
that frame is chosen so the contact point lies on its x axis and the motor
axis lies in its x-z plane, tilted by ``xi`` from the vertical. The shell
then turns at ``Omega z - omega0 z'`` and the center circles at
``R0 = omega0 R sin(xi) / Omega``.

The three unknowns ``(Omega, theta0, xi)`` are found by requiring the full
equations of motion to reproduce the rotating-frame acceleration
``Omega z x omega``. The residual calls :func:`spheroll.dynamics.angular_acceleration`
directly, so the steady state and the simulator share one model.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from spheroll.dynamics import (
    ShellState,
    angular_acceleration,
    damping_torque,
    inertia_operator,
    pendulum_kinematics,
)
from spheroll.errors import (
    InvalidStateError,
    NoConvergenceError,
    OutOfRangeError,
    SweepError,
    WrongBranchError,
)
from spheroll.spatial import E_X, E_Y, E_Z, cross, rotation_y

NORMAL = "normal"
FAST = "fast-revolving"

RESIDUAL_TOL = 1e-9
NEWTON_TOL = 1e-13
MAX_ITER = 100
FD_STEP = 1e-7
CONTINUATION_STEP = 0.05 * math.pi

TABLE_CSV_COLUMNS = ("omega0", "Omega", "theta0", "xi", "R0")


@dataclass(frozen=True)
class QuasiStaticState:
    omega0: float
    Omega: float
    theta0: float
    xi: float
    R0: float
    branch: str = NORMAL
    residual_norm: float = 0.0

    @property
    def x(self):
        return np.array([self.Omega, self.theta0, self.xi])

    @property
    def speed(self):
        """Speed of the shell center along its circle."""
        return abs(self.Omega) * self.R0

    def motor_axis(self):
        return np.array([math.sin(self.xi), 0.0, math.cos(self.xi)])

    def omega_vector(self):
        """Shell angular velocity at t = 0: revolving plus spin about the motor axis."""
        return self.Omega * E_Z - self.omega0 * self.motor_axis()


def revolving_radius(p, omega0, Omega, xi):
    if omega0 == 0.0:
        return p.R * math.tan(p.phi)
    return omega0 * p.R * math.sin(xi) / Omega


def ansatz_state(p, omega0, x, position=None):
    """Shell state at t = 0 of the steady revolution described by ``x``."""
    Omega, theta0, xi = x
    T = rotation_y(xi)
    omega = Omega * E_Z - omega0 * T[:, 2]
    if position is None:
        position = (revolving_radius(p, omega0, Omega, xi), 0.0)
    return ShellState(T, omega, np.array([position[0], position[1], p.R]), float(theta0), float(omega0))


def _mismatch(p, omega0, x):
    Omega = x[0]
    st = ansatz_state(p, omega0, x, position=(0.0, 0.0))
    masses = (pendulum_kinematics(p, st.theta, omega0, 0.0),)
    omega_dot = angular_acceleration(p, st, masses, None, damping_torque(p, st.omega))
    return omega_dot - Omega * cross(E_Z, st.omega), st, masses


def residual(p, omega0, x):
    """Angular-acceleration mismatch of the steady-revolution ansatz, in units of g/R.

    Zero exactly when ``x = (Omega, theta0, xi)`` is a steady state at
    driving speed ``omega0``.
    """
    if x[0] == 0.0:
        raise InvalidStateError("Omega = 0 has no revolving frame; use solve(p, 0.0) for the static limit")
    return _mismatch(p, omega0, x)[0] * (p.R / p.g)


def torque_balance(p, omega0, x):
    """Moment balance about the contact point written out term by term.

    Gravity and centrifugal load on the pendulum, the shell's centripetal
    term, damping and the gyroscopic term of the spinning shell. Equals
    ``inertia_operator @ (omega_dot_eom - omega_dot_ansatz)``; kept as an
    independent check on :func:`residual`.
    """
    Omega, theta0, xi = x
    R0 = revolving_radius(p, omega0, Omega, xi)
    z_axis = np.array([math.sin(xi), 0.0, math.cos(xi)])
    r = rotation_y(xi) @ pendulum_kinematics(p, theta0, omega0, 0.0).r_body
    u = p.R * E_Z + r
    horizontal = R0 * E_X + u - (u @ E_Z) * E_Z
    return (
        p.m * cross(u, -p.g * E_Z + Omega**2 * horizontal)
        + p.M * Omega**2 * R0 * p.R * E_Y
        - p.k0 * (-omega0 * z_axis + Omega * E_Z)
        + p.I * Omega * omega0 * math.sin(xi) * E_Y
    )


def static_limit(p):
    return QuasiStaticState(0.0, 0.0, 0.0, p.phi, p.R * math.tan(p.phi), NORMAL, 0.0)


def _default_guess(p, omega0):
    return np.array([omega0 * math.cos(p.phi), 0.0, p.phi])


def _jacobian(p, omega0, x):
    J = np.empty((3, 3))
    for j in range(3):
        h = FD_STEP * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (residual(p, omega0, xp) - residual(p, omega0, xm)) / (2.0 * h)
    return J


def _newton(p, omega0, x):
    """Newton iteration, halving the step while the residual does not drop."""
    x = np.array(x, dtype=float)
    f = residual(p, omega0, x)
    norm = float(np.linalg.norm(f))
    for _ in range(MAX_ITER):
        if norm < NEWTON_TOL:
            return x, norm
        try:
            dx = np.linalg.solve(_jacobian(p, omega0, x), -f)
        except np.linalg.LinAlgError as exc:
            raise NoConvergenceError(f"singular Jacobian at omega0={omega0}") from exc
        lam = 1.0
        while True:
            trial = x + lam * dx
            try:
                f_trial = residual(p, omega0, trial)
                n_trial = float(np.linalg.norm(f_trial))
            except InvalidStateError:
                n_trial = math.inf
            if n_trial < norm or lam < 1e-6:
                break
            lam *= 0.5
        if n_trial >= norm:
            if norm < RESIDUAL_TOL:
                return x, norm  # stalled at round-off
            raise NoConvergenceError(f"line search failed at omega0={omega0} (|f|={norm:.3g})")
        x, f, norm = trial, f_trial, n_trial
    if norm < RESIDUAL_TOL:
        return x, norm
    raise NoConvergenceError(f"no convergence after {MAX_ITER} iterations at omega0={omega0} (|f|={norm:.3g})")


def _wrap(angle):
    return math.remainder(angle, 2.0 * math.pi)


def _state(p, omega0, x, norm, branch):
    Omega, theta0, xi = float(x[0]), float(x[1]), _wrap(float(x[2]))
    if xi < 0.0:
        # same motion seen after a half turn about the vertical
        xi, theta0 = -xi, theta0 + math.pi
    theta0 = _wrap(theta0)
    return QuasiStaticState(
        omega0, Omega, theta0, xi, revolving_radius(p, omega0, Omega, xi), branch, norm
    )


def solve(p, omega0, guess=None, branch=NORMAL):
    """Steady revolving state at driving speed ``omega0``.

    ``guess`` is ``(Omega, theta0, xi)`` or a :class:`QuasiStaticState`;
    without one the normal branch is reached by continuation from rest.
    """
    if omega0 < 0.0:
        raise InvalidStateError(f"omega0 must be non-negative, got {omega0}")
    if branch not in (NORMAL, FAST):
        raise InvalidStateError(f"unknown branch {branch!r}")
    if omega0 == 0.0:
        if branch == FAST:
            raise InvalidStateError("the fast-revolving branch has no static limit")
        return static_limit(p)
    if isinstance(guess, QuasiStaticState):
        guess = guess.x
    if guess is None and branch == FAST:
        return _solve_fast(p, omega0)
    if guess is None:
        if omega0 > CONTINUATION_STEP:
            n = int(math.ceil(omega0 / CONTINUATION_STEP))
            x = _default_guess(p, omega0 / n)
            for k in range(1, n):
                x, _ = _newton(p, omega0 * k / n, x)
            guess = x
        else:
            guess = _default_guess(p, omega0)
    x, norm = _newton(p, omega0, guess)
    qs = _state(p, omega0, x, norm, branch)
    if branch == NORMAL and abs(qs.theta0) > math.pi / 2:
        raise WrongBranchError(
            f"solution at omega0={omega0} has theta0={qs.theta0:.3f}, on the fast-revolving branch"
        )
    if branch == FAST and abs(qs.theta0) < math.pi / 2:
        raise WrongBranchError(f"solution at omega0={omega0} fell back onto the normal branch")
    return qs


def _solve_fast(p, omega0):
    # counter-revolving family first, then the co-revolving one found at high speed
    last = None
    for guess in ((-0.8 * omega0, math.pi, 2.4), (0.9 * omega0, math.pi, 0.3)):
        try:
            return solve(p, omega0, guess, FAST)
        except (NoConvergenceError, WrongBranchError) as exc:
            last = exc
    raise NoConvergenceError(f"no fast-revolving state found at omega0={omega0}: {last}")


class QuasiStaticTable:
    """Steady states tabulated on an ascending grid of driving speeds."""

    def __init__(self, states, params=None):
        self.states = tuple(states)
        self.params = params
        if len(self.states) < 2:
            raise InvalidStateError("a table needs at least two states")
        self.omega0 = np.array([s.omega0 for s in self.states])
        if np.any(np.diff(self.omega0) <= 0.0):
            raise InvalidStateError("table grid must be strictly ascending")
        self.Omega = np.array([s.Omega for s in self.states])
        self.theta0 = np.array([s.theta0 for s in self.states])
        self.xi = np.array([s.xi for s in self.states])
        self.R0 = np.array([s.R0 for s in self.states])
        self._R0 = PchipInterpolator(self.omega0, self.R0)
        self._Omega = PchipInterpolator(self.omega0, self.Omega)
        self._xi = PchipInterpolator(self.omega0, self.xi)
        self._speed = None
        self._node_slope = None
        self._slope = None

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]

    @property
    def omega0_range(self):
        return float(self.omega0[0]), float(self.omega0[-1])

    def _check(self, omega0):
        lo, hi = self.omega0_range
        if not lo - 1e-12 <= omega0 <= hi + 1e-12:
            raise OutOfRangeError(f"omega0={omega0} outside table range [{lo}, {hi}]")

    def R0_at(self, omega0):
        self._check(omega0)
        return float(self._R0(omega0))

    def Omega_at(self, omega0):
        self._check(omega0)
        return float(self._Omega(omega0))

    def xi_at(self, omega0):
        self._check(omega0)
        return float(self._xi(omega0))

    def speed_at(self, omega0):
        return abs(self.Omega_at(omega0)) * self.R0_at(omega0)

    @property
    def speeds(self):
        return np.abs(self.Omega) * self.R0

    def omega0_for_radius(self, radius):
        """Driving speed whose steady radius is ``radius``; needs R0 increasing."""
        if not np.all(np.diff(self.R0) > 0.0):
            raise OutOfRangeError("R0 is not monotone over the table; cannot invert")
        if not self.R0[0] - 1e-12 <= radius <= self.R0[-1] + 1e-12:
            raise OutOfRangeError(f"radius {radius} outside [{self.R0[0]}, {self.R0[-1]}]")
        return float(_invert(self._R0, radius, *self.omega0_range))

    def omega0_for_speed(self, speed):
        speeds = self.speeds
        if not np.all(np.diff(speeds) > 0.0):
            raise OutOfRangeError("crossing speed is not monotone over the table")
        if not speeds[0] - 1e-12 <= speed <= speeds[-1] + 1e-12:
            raise OutOfRangeError(f"speed {speed} outside [{speeds[0]}, {speeds[-1]}]")
        if self._speed is None:
            self._speed = PchipInterpolator(self.omega0, speeds)
        return float(_invert(self._speed, speed, *self.omega0_range))

    def node_slopes(self):
        """dR0/domega0 at the nodes: centered differences, one-sided at the ends."""
        if self._node_slope is None:
            self._node_slope = np.gradient(self.R0, self.omega0, edge_order=2)
        return self._node_slope

    def rows(self):
        for s in self.states:
            yield (s.omega0, s.Omega, s.theta0, s.xi, s.R0)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TABLE_CSV_COLUMNS)
            for row in self.rows():
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, params=None):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != TABLE_CSV_COLUMNS:
                raise InvalidStateError(f"unexpected columns {header}")
            states = [QuasiStaticState(*map(float, row)) for row in reader]
        return cls(states, params)


def _invert(fn, target, lo, hi):
    # bisection on a monotone increasing interpolant
    f_lo = float(fn(lo)) - target
    if f_lo >= 0.0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(fn(mid)) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def sweep(p, omega0_grid, branch=NORMAL):
    """Continuation along an ascending grid that starts at zero."""
    grid = [float(w) for w in omega0_grid]
    if not grid or grid[0] != 0.0:
        raise InvalidStateError("sweep grid must start at 0")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidStateError("sweep grid must be strictly ascending")
    states = [static_limit(p)]
    failures = {}
    x = None
    w_prev = 0.0
    for w in grid[1:]:
        try:
            n = max(1, int(math.ceil((w - w_prev) / CONTINUATION_STEP)))
            for k in range(1, n + 1):
                wk = w_prev + (w - w_prev) * k / n
                if x is None:
                    start = _default_guess(p, wk) if branch == NORMAL else solve(p, wk, branch=FAST).x
                else:
                    start = x
                x, norm = _newton(p, wk, start)
            qs = _state(p, w, x, norm, branch)
            if branch == NORMAL and abs(qs.theta0) > math.pi / 2:
                raise WrongBranchError(f"theta0={qs.theta0:.3f} left the normal branch")
            states.append(qs)
            w_prev = w
        except (NoConvergenceError, WrongBranchError) as exc:
            failures[w] = exc
    if failures:
        partial = QuasiStaticTable(states, p) if len(states) >= 2 else None
        raise SweepError(failures, partial)
    return QuasiStaticTable(states, p)


def default_grid(omega0_max=3 * math.pi, n=50):
    return np.linspace(0.0, omega0_max, n)


def radius_slope(table, omega0):
    """dR0/domega0 from centered node differences, interpolated monotonically."""
    table._check(omega0)
    if table._slope is None:
        table._slope = PchipInterpolator(table.omega0, table.node_slopes())
    return float(table._slope(omega0))


def inertia_at(p, qs):
    st = ansatz_state(p, qs.omega0, qs.x)
    return inertia_operator(p, st.T, (pendulum_kinematics(p, qs.theta0, qs.omega0, 0.0),))
