"""Figures drawn from the CSV outputs. Uses the non-interactive Agg backend."""

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _read(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def _col(rows, name):
    return np.array([float(r[name]) for r in rows])


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def quasistatic_curves(table_csv, path):
    """Radius, revolving rate and tilt against driving speed."""
    rows = _read(table_csv)
    w = _col(rows, "omega0")
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
    axes[0].plot(w, _col(rows, "R0"))
    axes[0].set_ylabel("R0 [m]")
    axes[1].plot(w, _col(rows, "Omega"))
    axes[1].set_ylabel("Omega [rad/s]")
    axes[2].plot(w, np.degrees(_col(rows, "xi")))
    axes[2].set_ylabel("tilt [deg]")
    for ax in axes:
        ax.set_xlabel("omega0 [rad/s]")
        ax.grid(alpha=0.3)
    return _save(fig, path)


def eigenvalue_locus(locus_csv, path):
    rows = [r for r in _read(locus_csv) if r["trivial"] == "0"]
    w = _col(rows, "omega0")
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    sc = ax.scatter(_col(rows, "re"), _col(rows, "im"), c=w, s=10, cmap="viridis")
    fig.colorbar(sc, ax=ax, label="omega0 [rad/s]")
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.grid(alpha=0.3)
    return _save(fig, path)


def open_loop_comparison(compare_csv, path):
    """Predicted against simulated steady radius and tilt."""
    rows = [r for r in _read(compare_csv) if r["R0_sim"] not in ("nan", "")]
    w = _col(rows, "omega0")
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4))
    axes[0].plot(w, _col(rows, "R0_pred"), "-", label="steady-state solution")
    axes[0].plot(w, _col(rows, "R0_sim"), "o", label="simulation")
    axes[0].set_ylabel("R0 [m]")
    axes[1].plot(w, _col(rows, "xi_pred_deg"), "-")
    axes[1].plot(w, _col(rows, "xi_sim_deg"), "o")
    axes[1].set_ylabel("tilt [deg]")
    for ax in axes:
        ax.set_xlabel("omega0 [rad/s]")
        ax.grid(alpha=0.3)
    axes[0].legend()
    return _save(fig, path)


def paths(trajectory_csvs, path, targets=(), circles=()):
    """Ground tracks of one or more runs, with target points and circles."""
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    for name in trajectory_csvs:
        rows = _read(name)
        ax.plot(_col(rows, "s_x"), _col(rows, "s_y"), lw=0.7)
    for x, y in targets:
        ax.plot(x, y, "kx", ms=8)
    t = np.linspace(0.0, 2.0 * np.pi, 200)
    for (cx, cy), r in circles:
        ax.plot(cx + r * np.cos(t), cy + r * np.sin(t), "k--", lw=0.6)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.grid(alpha=0.3)
    return _save(fig, path)
