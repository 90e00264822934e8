"""Simulation and control of a single-actuator, pendulum-driven spherical robot.

The shell rolls without slipping on a flat floor while one motor swings an
offset pendulum mass around a tilted axis. Holding the motor speed constant
makes the robot revolve on a circle whose radius grows with the speed; the
controller in :mod:`spheroll.controller` exploits that to steer the circle's
center.
"""

from spheroll.dynamics import ContactReport, MassKinematics, RobotParams, ShellState
from spheroll.errors import SpherollError

__version__ = "0.1.0"

__all__ = [
    "ContactReport",
    "MassKinematics",
    "RobotParams",
    "ShellState",
    "SpherollError",
    "__version__",
]
