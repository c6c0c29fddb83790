"""Independent numerical ground truth for every closed form in the package.

Classic fourth-order Runge-Kutta with step-doubling error control.  The
point is verifiability, not speed: one textbook scheme whose error
estimate follows from Richardson extrapolation, plus explicit guards for
the two ways a polynomial system can defeat any integrator (finite-time
blow-up and the step collapsing against a singularity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BLOWUP_NORM = 1e6
STEP_UNDERFLOW_FACTOR = 1e-14

COMPLETED = "completed"
NORM_EXCEEDED = "norm_exceeded"
STEP_UNDERFLOW = "step_underflow"
BLOWUP = "blowup"


@dataclass(frozen=True)
class Termination:
    kind: str
    time: float | None = None
    threshold: float | None = None


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # one row per time
    terminated: Termination

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.states, dtype=float)
        if t.ndim != 1 or x.ndim != 2 or x.shape[0] != t.shape[0]:
            raise ValueError("times and states shapes do not match")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        t.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", x)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    def state_at(self, t: float) -> np.ndarray:
        """State recorded at time t (must be one of the stored times)."""
        idx = np.flatnonzero(np.isclose(self.times, t, rtol=1e-12, atol=1e-12))
        if idx.size == 0:
            raise KeyError(f"time {t} was not recorded")
        return self.states[int(idx[0])]


def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(system, x0, t_end: float, rtol: float = 1e-9,
              atol: float = 1e-12, norm_threshold: float = BLOWUP_NORM,
              checkpoints=None) -> Trajectory:
    """Integrate x' = system.rhs(x) from 0 to t_end.

    Step doubling: each step is taken once with h and twice with h/2; the
    mismatch divided by 15 estimates the local error of the half-step
    result, which is accepted (with extrapolation) when the estimate is
    below atol + rtol * |state|.  Integration stops early with a
    norm_exceeded marker when the state norm passes `norm_threshold`, or
    with step_underflow when the accepted step would fall below
    1e-14 * t_end while chasing a singularity.

    `checkpoints` lists times that must land exactly on step boundaries,
    so callers can read off states at prescribed sample points.
    """
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    x0 = np.asarray(x0, dtype=float)
    f = system.rhs

    pending = []
    if checkpoints is not None:
        pending = sorted({float(c) for c in checkpoints if 0.0 < float(c) <= t_end})

    times = [0.0]
    states = [x0.copy()]
    t = 0.0
    y = x0.copy()
    h = t_end / 100.0
    h_min = STEP_UNDERFLOW_FACTOR * t_end
    terminated = Termination(COMPLETED)

    if float(np.linalg.norm(y)) > norm_threshold:
        return Trajectory(np.array(times), np.array(states),
                          Termination(NORM_EXCEEDED, time=0.0,
                                      threshold=norm_threshold))

    while t < t_end:
        if h < h_min:
            terminated = Termination(STEP_UNDERFLOW, time=t)
            break
        target = pending[0] if pending else t_end
        h_try = min(h, target - t)
        full = _rk4_step(f, y, h_try)
        half = _rk4_step(f, y, 0.5 * h_try)
        double = _rk4_step(f, half, 0.5 * h_try)
        diff = double - full
        err = float(np.linalg.norm(diff)) / 15.0
        scale = atol + rtol * max(float(np.linalg.norm(y)),
                                  float(np.linalg.norm(double)))
        if not np.isfinite(err):
            h = 0.25 * h_try
            continue
        if err <= scale:
            t = t + h_try
            if pending and abs(t - pending[0]) <= 1e-12 * max(1.0, pending[0]):
                t = pending.pop(0)
            y = double + diff / 15.0
            times.append(t)
            states.append(y.copy())
            if float(np.linalg.norm(y)) > norm_threshold:
                terminated = Termination(NORM_EXCEEDED, time=t,
                                         threshold=norm_threshold)
                break
            grow = 0.9 * (scale / err) ** 0.2 if err > 0.0 else 5.0
            h = h_try * min(5.0, max(1.0, grow))
        else:
            h = h_try * max(0.1, 0.9 * (scale / err) ** 0.2)
    return Trajectory(np.array(times), np.array(states), terminated)


def states_at(system, x0, sample_times, rtol: float = 1e-9,
              atol: float = 1e-12, norm_threshold: float = BLOWUP_NORM):
    """Integrate once and read off the states at the requested times.

    Returns (states, trajectory); states has one row per requested time
    and is truncated where integration terminated early.
    """
    sample_times = np.asarray(sample_times, dtype=float)
    if sample_times.size == 0:
        raise ValueError("need at least one sample time")
    if np.any(np.diff(sample_times) <= 0) or sample_times[0] < 0:
        raise ValueError("sample times must be nonnegative and increasing")
    t_max = float(sample_times[-1])
    if t_max == 0.0:
        traj = Trajectory(np.zeros(1), np.asarray([x0], dtype=float),
                          Termination(COMPLETED))
        return np.asarray([x0], dtype=float), traj
    traj = integrate(system, x0, t_max, rtol=rtol, atol=atol,
                     norm_threshold=norm_threshold, checkpoints=sample_times)
    rows = []
    for t in sample_times:
        try:
            rows.append(traj.state_at(t))
        except KeyError:
            break
    return np.array(rows), traj


def escape_time_estimate(system, x0, threshold: float = BLOWUP_NORM,
                         t_cap: float = 50.0, rtol: float = 1e-9,
                         atol: float = 1e-12):
    """First time the integrated norm crosses `threshold`, None if it
    never does before t_cap."""
    traj = integrate(system, x0, t_cap, rtol=rtol, atol=atol,
                     norm_threshold=threshold)
    if traj.terminated.kind == NORM_EXCEEDED:
        return traj.terminated.time
    return None
