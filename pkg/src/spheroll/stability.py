"""Linear stability of the steady revolving states.

Orientation perturbations are written in the frame that turns with the
steady motion: the shell orientation becomes ``exp([alpha]) T0`` once the
revolving turn and the motor's own rotation are factored out. Because that
frame makes the motion time-invariant, ``(alpha, alpha_dot)`` obeys an
autonomous second-order system whose 6x6 companion matrix

    [[0, I3],
     [A, B ]]

is built here by central differences of the full equations of motion. One
eigenvalue is always (numerically) zero: turning the whole motion about the
vertical gives another steady state. The slowest of the others sets the
recovery time.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from spheroll.dynamics import ShellState, angular_acceleration, damping_torque, pendulum_kinematics
from spheroll.errors import AmbiguousTrivialModeError, InvalidStateError, NoConvergenceError
from spheroll.quasistatic import RESIDUAL_TOL
from spheroll.spatial import E_Z, cross, exp_so3, log_so3, rotation_y, rotation_z

LINEARIZE_STEP = 1e-6
TRIVIAL_TOL = 1e-6
QR_MAX_SWEEPS = 60

LOCUS_CSV_COLUMNS = ("omega0", "index", "re", "im", "trivial")


@dataclass(frozen=True)
class StabilityReport:
    omega0: float
    eigenvalues: np.ndarray
    trivial_mode_index: int
    tau: float
    stable: bool
    trivial_alignment: float = math.nan

    @property
    def dominant(self):
        """Slowest non-trivial eigenvalue."""
        others = [lam for i, lam in enumerate(self.eigenvalues) if i != self.trivial_mode_index]
        return max(others, key=lambda lam: (lam.real, abs(lam.imag)))


def perturbed_state(p, qs, alpha, alpha_dot, position=None):
    """Full state at t = 0 for a small orientation offset from the steady motion."""
    alpha = np.asarray(alpha, dtype=float)
    C = exp_so3(alpha) @ rotation_y(qs.xi)
    omega = qs.Omega * E_Z + np.asarray(alpha_dot, dtype=float) - qs.omega0 * C[:, 2]
    if position is None:
        position = (qs.R0, 0.0)
    return ShellState(C, omega, np.array([position[0], position[1], p.R]), qs.theta0, qs.omega0)


def orientation_offset(qs, st, t):
    """Recover ``alpha`` from a state reached at time ``t`` after :func:`perturbed_state`."""
    C = rotation_z(qs.Omega * t).T @ st.T @ rotation_z(st.theta - qs.theta0)
    return log_so3(C @ rotation_y(qs.xi).T)


def co_rotating_acceleration(p, qs, alpha, nu):
    """Time derivative of the co-rotating angular velocity ``nu`` at t = 0."""
    st = perturbed_state(p, qs, alpha, nu, position=(0.0, 0.0))
    masses = (pendulum_kinematics(p, qs.theta0, qs.omega0, 0.0),)
    omega_dot = angular_acceleration(p, st, masses, None, damping_torque(p, st.omega))
    spin_axis = st.T[:, 2]
    nu = np.asarray(nu, dtype=float)
    return (
        omega_dot
        - qs.Omega * cross(E_Z, nu - qs.omega0 * spin_axis)
        + qs.omega0 * cross(nu, spin_axis)
    )


def linearize(p, qs, step=LINEARIZE_STEP):
    """Companion matrix of the perturbation dynamics around ``qs``."""
    if not qs.residual_norm < RESIDUAL_TOL:
        raise InvalidStateError(f"steady state at omega0={qs.omega0} is not converged")
    jac = np.zeros((6, 6))
    jac[:3, 3:] = np.eye(3)
    zero = np.zeros(3)
    for j in range(6):
        d = np.zeros(6)
        d[j] = step
        plus = co_rotating_acceleration(p, qs, zero + d[:3], zero + d[3:])
        minus = co_rotating_acceleration(p, qs, zero - d[:3], zero - d[3:])
        jac[3:, j] = (plus - minus) / (2.0 * step)
    return jac


def _hessenberg(a):
    h = np.array(a, dtype=float)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x
        v[0] += math.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        h[k + 1 :, :] -= 2.0 * np.outer(v, v @ h[k + 1 :, :])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ v, v)
        h[k + 2 :, k] = 0.0
    return h


def _sign(a, b):
    return abs(a) if b >= 0.0 else -abs(a)


def _hqr(a):
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR."""
    a = [list(map(float, row)) for row in a]
    n = len(a)
    eps = np.finfo(float).eps
    wr = [0.0] * n
    wi = [0.0] * n
    anorm = sum(abs(a[i][j]) for i in range(n) for j in range(max(i - 1, 0), n))
    nn = n - 1
    t = 0.0
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l >= 1:
                s = abs(a[l - 1][l - 1]) + abs(a[l][l])
                if s == 0.0:
                    s = anorm
                if abs(a[l][l - 1]) <= eps * s:
                    a[l][l - 1] = 0.0
                    break
                l -= 1
            x = a[nn][nn]
            if l == nn:
                wr[nn], wi[nn] = x + t, 0.0
                nn -= 1
                break
            y = a[nn - 1][nn - 1]
            w = a[nn][nn - 1] * a[nn - 1][nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + _sign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1], wi[nn] = -z, z
                nn -= 2
                break
            if its == QR_MAX_SWEEPS:
                raise NoConvergenceError("QR iteration did not converge")
            if its in (10, 20):
                # exceptional shift
                t += x
                for i in range(nn + 1):
                    a[i][i] -= x
                s = abs(a[nn][nn - 1]) + abs(a[nn - 1][nn - 2])
                y = x = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            m = nn - 2
            while m >= l:
                z = a[m][m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1][m] + a[m][m + 1]
                q = a[m + 1][m + 1] - z - r - s
                r = a[m + 2][m + 1]
                s = abs(p) + abs(q) + abs(r)
                p, q, r = p / s, q / s, r / s
                if m == l:
                    break
                u = abs(a[m][m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1][m - 1]) + abs(z) + abs(a[m + 1][m + 1]))
                if u <= eps * v:
                    break
                m -= 1
            for i in range(m, nn - 1):
                a[i + 2][i] = 0.0
                if i != m:
                    a[i + 2][i - 1] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k][k - 1]
                    q = a[k + 1][k - 1]
                    r = a[k + 2][k - 1] if k + 1 != nn else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p, q, r = p / x, q / x, r / x
                s = _sign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k][k - 1] = -a[k][k - 1]
                else:
                    a[k][k - 1] = -s * x
                p += s
                x, y, z = p / s, q / s, r / s
                q, r = q / p, r / p
                for j in range(k, nn + 1):
                    p = a[k][j] + q * a[k + 1][j]
                    if k + 1 != nn:
                        p += r * a[k + 2][j]
                        a[k + 2][j] -= p * z
                    a[k + 1][j] -= p * y
                    a[k][j] -= p * x
                for i in range(l, min(nn, k + 3) + 1):
                    p = x * a[i][k] + y * a[i][k + 1]
                    if k + 1 != nn:
                        p += z * a[i][k + 2]
                        a[i][k + 2] -= p * r
                    a[i][k + 1] -= p * q
                    a[i][k] -= p
    return np.array(wr) + 1j * np.array(wi)


def spectrum(m):
    """Eigenvalues of a small real matrix, sorted by descending real part."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidStateError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidStateError("matrix has non-finite entries")
    eig = _hqr(_hessenberg(m)) if m.shape[0] > 1 else m[0].astype(complex)
    order = np.lexsort((-eig.imag, -eig.real))
    return eig[order]


def recovery(eigenvalues, trivial_tol=TRIVIAL_TOL):
    """Drop the symmetry mode and read off recovery time and stability.

    Returns ``(tau, stable, trivial_index)``. The symmetry mode is the
    eigenvalue closest to the imaginary axis; two candidates within
    ``trivial_tol`` of it make the choice ambiguous.
    """
    eig = np.asarray(eigenvalues, dtype=complex)
    near = [i for i, lam in enumerate(eig) if abs(lam.real) < trivial_tol]
    if len(near) > 1:
        raise AmbiguousTrivialModeError(
            f"{len(near)} eigenvalues with |Re| < {trivial_tol}: {eig[near]}", candidates=near
        )
    trivial = int(np.argmin(np.abs(eig.real)))
    rest = np.delete(eig, trivial)
    lead = float(np.max(rest.real))
    stable = bool(np.all(rest.real < 0.0))
    tau = -1.0 / lead if lead < 0.0 else math.inf
    return tau, stable, trivial


def _trivial_alignment(jac, lam):
    # null vector of (J - lam I), compared with a rigid turn about the vertical
    _, _, vh = np.linalg.svd(jac - lam.real * np.eye(jac.shape[0]))
    v = vh[-1]
    return float(abs(v[2]) / np.linalg.norm(v))


def analyze(p, qs, step=LINEARIZE_STEP):
    jac = linearize(p, qs, step)
    eig = spectrum(jac)
    tau, stable, trivial = recovery(eig)
    return StabilityReport(qs.omega0, eig, trivial, tau, stable, _trivial_alignment(jac, eig[trivial]))


def sweep(p, table):
    """Stability of every state of a quasistatic table (or any iterable of states)."""
    return [analyze(p, qs) for qs in table]


def write_locus_csv(reports, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOCUS_CSV_COLUMNS)
        for rep in reports:
            for i, lam in enumerate(rep.eigenvalues):
                writer.writerow([repr(float(rep.omega0)), i, repr(float(lam.real)), repr(float(lam.imag)), int(i == rep.trivial_mode_index)])
