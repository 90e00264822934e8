"""Scenario runners: open-loop sweep, closed-loop circles and waypoint stops.

Each runner takes a :class:`ScenarioConfig`, runs its independent points
(driving speeds, target radii) on a process pool when ``cfg.workers > 1``,
writes one trajectory file per point and returns a :class:`RunReport` whose
metrics all refer back to those files.
"""

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from spheroll import quasistatic
from spheroll.controller import WaypointTask, plan_waypoint
from spheroll.dynamics import ShellState
from spheroll.errors import SpherollError
from spheroll.harness.closed_loop import CONTROL_LOG_COLUMNS, ClosedLoop
from spheroll.integrator import DriveProfile, fit_revolution, simulate

OPEN_LOOP_CSV_COLUMNS = (
    "omega0", "R0_pred", "R0_sim", "Omega_pred", "Omega_sim", "xi_pred_deg", "xi_sim_deg", "fit_residual", "trajectory",
)
CIRCLE_CSV_COLUMNS = (
    "R_g", "R_fit", "center_x", "center_y", "center_err", "capture_time", "approach_speed", "trajectory",
)
WAYPOINT_CSV_COLUMNS = ("index", "x", "y", "mode", "stop_x", "stop_y", "distance", "t_trigger", "trajectory")


@dataclass
class Check:
    name: str
    value: float
    limit: float
    passed: bool
    kind: str = "max"  # "max": value <= limit, "min": value >= limit, "true": boolean

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        if self.kind == "true":
            return f"{mark}\t{self.name}"
        op = "<=" if self.kind == "max" else ">="
        return f"{mark}\t{self.name}\t{self.value:.6g} {op} {self.limit:.6g}"


def _check_max(name, value, limit):
    return Check(name, float(value), float(limit), bool(value <= limit), "max")


def _check_min(name, value, limit):
    return Check(name, float(value), float(limit), bool(value >= limit), "min")


def _check_true(name, ok):
    return Check(name, float(bool(ok)), 1.0, bool(ok), "true")


@dataclass
class RunReport:
    kind: str
    metrics: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    @property
    def passed(self):
        return not self.failures and all(c.passed for c in self.checks)

    def to_dict(self):
        return {
            "kind": self.kind,
            "passed": self.passed,
            "metrics": self.metrics,
            "checks": [vars(c) for c in self.checks],
            "artifacts": self.artifacts,
            "failures": {str(k): v for k, v in self.failures.items()},
        }

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        return cls(
            data["kind"],
            data["metrics"],
            [Check(**c) for c in data["checks"]],
            data["artifacts"],
            data["failures"],
        )

    def summary_lines(self):
        lines = [c.line() for c in self.checks]
        lines += [f"FAIL\t{key}\t{msg}" for key, msg in self.failures.items()]
        return lines


def _map(fn, jobs, workers):
    """Run ``fn(*job)`` for each job; exceptions are returned in place of results."""
    if workers <= 1 or len(jobs) <= 1:
        return [_guard(fn, job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_guard, [fn] * len(jobs), jobs))


def _guard(fn, job):
    try:
        return fn(*job)
    except SpherollError as exc:
        return exc


def _out_path(out_dir, name):
    if out_dir is None:
        return None
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _write_rows(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


# -- open loop ---------------------------------------------------------------


def open_loop_point(cfg, omega0):
    """Drive from rest up to ``omega0``, settle, and fit the steady circle."""
    p, ol, integ = cfg.robot, cfg.open_loop, cfg.integrator
    qs = quasistatic.solve(p, omega0)
    ramp = abs(omega0) / ol.beta if omega0 else 0.0
    duration = ramp + ol.settle_time
    drive = DriveProfile.ramp(omega0, ol.beta, beta_max=max(ol.beta, 1e-9)) if omega0 else DriveProfile.constant(0.0)
    traj = simulate(p, ShellState.at_rest(p), drive, duration, integ.dt, integ.stride, strict=cfg.strict_contact)
    row = {
        "omega0": float(omega0),
        "R0_pred": qs.R0,
        "Omega_pred": qs.Omega,
        "xi_pred_deg": math.degrees(qs.xi),
        "normal_positive": bool(np.all(traj.normal_positive)),
        "within_cone": bool(np.all(traj.within_cone)),
    }
    if omega0 == 0.0:
        # no circle to fit: the robot only rocks into its static tilt
        row.update(R0_sim=math.nan, Omega_sim=0.0, xi_sim_deg=math.degrees(float(traj.tilt[-1])), fit_residual=math.nan)
    else:
        fit = fit_revolution(traj, t_from=duration - ol.fit_window)
        row.update(R0_sim=fit.radius, Omega_sim=fit.Omega, xi_sim_deg=math.degrees(fit.xi), fit_residual=fit.residual)
    return row, traj


def run_open_loop(cfg, out_dir=None):
    tol = cfg.tolerances
    grid = list(cfg.open_loop.omega0)
    results = _map(open_loop_point, [(cfg, w) for w in grid], cfg.workers)
    report = RunReport("open-loop-sweep")
    for i, (w, res) in enumerate(zip(grid, results)):
        tag = f"omega0={w:.4f}"
        if isinstance(res, Exception):
            report.failures[tag] = f"{type(res).__name__}: {res}"
            continue
        row, traj = res
        path = _out_path(out_dir, f"open_loop_{i:02d}.csv")
        if path:
            traj.to_csv(path)
            report.artifacts.append(path)
        row["trajectory"] = os.path.basename(path) if path else ""
        report.metrics.append(row)
        report.checks.append(_check_true(f"{tag} normal force positive", row["normal_positive"]))
        xi_err = abs(row["xi_sim_deg"] - row["xi_pred_deg"])
        if w == 0.0:
            report.checks.append(_check_max(f"{tag} static tilt error [deg]", xi_err, tol.static_xi_deg))
            continue
        report.checks.append(_check_max(f"{tag} R0 relative error", abs(row["R0_sim"] / row["R0_pred"] - 1.0), tol.open_loop_R0_rel))
        report.checks.append(
            _check_max(f"{tag} Omega relative error", abs(row["Omega_sim"] / row["Omega_pred"] - 1.0), tol.open_loop_Omega_rel)
        )
        report.checks.append(_check_max(f"{tag} tilt error [deg]", xi_err, tol.open_loop_xi_deg))
    points = list(report.metrics)
    fitted = [r for r in points if r["omega0"] != 0.0]
    if fitted:
        report.metrics.append({"max_R0_discrepancy": max(abs(r["R0_sim"] - r["R0_pred"]) for r in fitted)})
    path = _out_path(out_dir, "open_loop_compare.csv")
    if path and points:
        _write_rows(path, OPEN_LOOP_CSV_COLUMNS, ([r[c] for c in OPEN_LOOP_CSV_COLUMNS] for r in points))
        report.artifacts.append(path)
    return report


# -- closed loop: circles ----------------------------------------------------


def capture_time(traj, center, R_g, band):
    """First time after which the distance to ``center`` stays within ``band`` of ``R_g``."""
    dist = np.hypot(traj.s[:, 0] - center[0], traj.s[:, 1] - center[1])
    outside = np.nonzero(np.abs(dist - R_g) > band)[0]
    if len(outside) == 0:
        return float(traj.t[0])
    if outside[-1] == len(traj) - 1:
        return math.inf
    return float(traj.t[outside[-1] + 1])


def circle_point(cfg, R_g, table, index):
    c = cfg.circle
    loop = ClosedLoop(
        cfg.robot,
        table,
        cfg.controller.gains,
        cfg.controller.limits,
        cfg.loop_settings(),
        ShellState.at_rest(cfg.robot, position=c.start),
        seed=[cfg.seed, index],
        strict=cfg.strict_contact,
    )
    task = WaypointTask.circle(c.center, R_g, table)
    loop.run_task(task, c.duration)
    traj = loop.trajectory()
    fit = fit_revolution(traj, t_from=loop.t - c.fit_window)
    center = np.array(c.center, dtype=float)
    t_cap = capture_time(traj, center, R_g, cfg.tolerances.circle_radius_rel * R_g)
    start_gap = float(np.hypot(*(np.array(c.start, dtype=float) - center))) - R_g
    row = {
        "R_g": float(R_g),
        "R_fit": fit.radius,
        "center_x": float(fit.center[0]),
        "center_y": float(fit.center[1]),
        "center_err": float(np.hypot(*(fit.center[:2] - center))),
        "capture_time": t_cap,
        "approach_speed": start_gap / t_cap if 0.0 < t_cap < math.inf else math.nan,
        "normal_positive": bool(np.all(traj.normal_positive)),
        "within_cone": bool(np.all(traj.within_cone)),
    }
    return row, traj, loop.log


def run_circle(cfg, out_dir=None):
    tol = cfg.tolerances
    table = quasistatic.sweep(cfg.robot, quasistatic.default_grid())
    radii = list(cfg.circle.radii)
    results = _map(circle_point, [(cfg, R, table, i) for i, R in enumerate(radii)], cfg.workers)
    report = RunReport("circle")
    for i, (R_g, res) in enumerate(zip(radii, results)):
        tag = f"R_g={R_g:.2f}"
        if isinstance(res, Exception):
            report.failures[tag] = f"{type(res).__name__}: {res}"
            continue
        row, traj, log = res
        path = _out_path(out_dir, f"circle_{i:02d}.csv")
        if path:
            traj.to_csv(path)
            log_path = _out_path(out_dir, f"circle_{i:02d}_control.csv")
            _write_rows(log_path, CONTROL_LOG_COLUMNS, ([float(v) for v in r] for r in log))
            report.artifacts += [path, log_path]
        row["trajectory"] = os.path.basename(path) if path else ""
        report.metrics.append(row)
        report.checks.append(_check_true(f"{tag} normal force positive", row["normal_positive"]))
        report.checks.append(_check_max(f"{tag} radius relative error", abs(row["R_fit"] / R_g - 1.0), tol.circle_radius_rel))
        report.checks.append(_check_max(f"{tag} center error [m]", row["center_err"], tol.circle_center_abs))
        if not math.isfinite(row["capture_time"]):
            report.failures[f"{tag} capture"] = "not captured within the horizon"
            continue
        speed = row["approach_speed"]
        if math.isfinite(speed):
            report.checks.append(_check_min(f"{tag} approach speed [m/s]", speed, tol.approach_speed_min))
            report.checks.append(_check_max(f"{tag} approach speed [m/s]", speed, tol.approach_speed_max))
    path = _out_path(out_dir, "circle_summary.csv")
    if path and report.metrics:
        _write_rows(path, CIRCLE_CSV_COLUMNS, ([r[c] for c in CIRCLE_CSV_COLUMNS] for r in report.metrics))
        report.artifacts.append(path)
    return report


# -- closed loop: waypoints --------------------------------------------------


def run_waypoint_sequence(cfg, table):
    """Visit the configured waypoints in order. Returns ``(rows, trajectory, log)``."""
    w = cfg.waypoints
    limits = cfg.controller.limits
    loop = ClosedLoop(
        cfg.robot,
        table,
        cfg.controller.gains,
        limits,
        cfg.loop_settings(),
        ShellState.at_rest(cfg.robot, position=w.start),
        seed=[cfg.seed],
        strict=cfg.strict_contact,
    )
    prev = tuple(w.start)
    rows = []
    for i, pt in enumerate(w.points):
        target = (float(pt["x"]), float(pt["y"]))
        if pt["speed"] == "stop":
            task = plan_waypoint(target, None, table, limits, approach_from=prev, stop_radius=w.stop_radius)
            stopped, t_trigger = loop.approach_and_stop(task, w.timeout)
            final = loop.st.s[:2]
            rows.append(
                {
                    "index": i, "x": target[0], "y": target[1], "mode": "stop",
                    "stop_x": float(final[0]), "stop_y": float(final[1]),
                    "distance": float(np.hypot(*(final - np.array(target)))) if stopped else math.inf,
                    "t_trigger": t_trigger if stopped else math.nan,
                }
            )
        else:
            heading = np.array(target) - np.array(prev)
            if not np.any(heading):
                heading = np.array([1.0, 0.0])
            velocity = float(pt["speed"]) * heading / np.linalg.norm(heading)
            task = plan_waypoint(target, velocity, table, limits)
            closest = _pass_through(loop, task, w.pass_duration)
            rows.append(
                {
                    "index": i, "x": target[0], "y": target[1], "mode": "pass",
                    "stop_x": math.nan, "stop_y": math.nan, "distance": closest, "t_trigger": math.nan,
                }
            )
        prev = target
    return rows, loop.trajectory(), loop.log


def _pass_through(loop, task, duration):
    """Circle ``task`` for ``duration`` seconds; closest distance to its point."""
    best = math.inf
    end = loop.t + duration
    while loop.t < end:
        loop.control(task)
        best = min(best, float(np.hypot(*(loop.st.s[:2] - task.s_g[:2]))))
    return best


def run_waypoints(cfg, out_dir=None):
    table = quasistatic.sweep(cfg.robot, quasistatic.default_grid())
    report = RunReport("waypoints")
    res = _guard(run_waypoint_sequence, (cfg, table))
    if isinstance(res, Exception):
        report.failures["waypoints"] = f"{type(res).__name__}: {res}"
        return report
    rows, traj, log = res
    path = _out_path(out_dir, "waypoints_trajectory.csv")
    if path:
        traj.to_csv(path)
        log_path = _out_path(out_dir, "waypoints_control.csv")
        _write_rows(log_path, CONTROL_LOG_COLUMNS, ([float(v) for v in r] for r in log))
        summary = _out_path(out_dir, "waypoints_summary.csv")
        for r in rows:
            r["trajectory"] = os.path.basename(path)
        _write_rows(summary, WAYPOINT_CSV_COLUMNS, ([r[c] for c in WAYPOINT_CSV_COLUMNS] for r in rows))
        report.artifacts += [path, log_path, summary]
    else:
        for r in rows:
            r["trajectory"] = ""
    report.metrics = rows
    report.checks.append(_check_true("normal force positive", bool(np.all(traj.normal_positive))))
    for r in rows:
        if r["mode"] == "stop":
            report.checks.append(
                _check_max(f"vertex {r['index']} ({r['x']:g}, {r['y']:g}) stop distance [m]", r["distance"], cfg.tolerances.stop_abs)
            )
    return report


RUNNERS = {"open-loop-sweep": run_open_loop, "circle": run_circle, "waypoints": run_waypoints}


def run(cfg, out_dir=None):
    return RUNNERS[cfg.kind](cfg, out_dir)
