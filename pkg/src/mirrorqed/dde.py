"""Fixed-step method-of-steps integrator for retarded and neutral DDEs.

The step always divides every delay, so delayed lookups at the first and last
RK4 stage land on stored nodes and only the midpoint stage interpolates. Each
node keeps two derivative entries: the right limit (the rhs value that starts
the next step) and the left limit (the rhs value seen from the preceding
interval). They only differ where a derivative jump has been propagated from
``t = 0`` by the delay, i.e. at integer multiples of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

RhsFn = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
HistoryFn = Callable[[float], "tuple[np.ndarray, np.ndarray]"]

_COMMENSURATE_TOL = 1e-9


class NumericalError(RuntimeError):
    """Integration produced a non-finite value."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message if t is None else f"{message} (t={t!r})")
        self.t = t


@dataclass(frozen=True)
class DelaySystem:
    """A DDE ``y'(t) = rhs(t, y(t), y(t - d_k), y'(t - d_k))``.

    ``rhs`` receives the delayed states and delayed derivatives stacked as
    ``(len(delays), dimension)`` arrays (empty first axis when there is no
    delay). ``history(t)`` returns ``(state, derivative)`` for ``t <= 0``.
    The initial state is ``history(0)[0]`` unless ``initial_state`` is given,
    in which case ``history(0)`` is the left limit and the solution may jump
    at ``t = 0``.
    """

    dimension: int
    rhs: RhsFn
    history: HistoryFn
    delays: tuple[float, ...] = ()
    neutral: bool = False
    initial_state: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if any(not (d > 0) for d in self.delays):
            raise ValueError(f"delays must be strictly positive, got {self.delays!r}")


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, h: float,
             k1: np.ndarray | None = None) -> np.ndarray:
    """One classical Runge-Kutta step; ``k1`` may be supplied when already known."""
    if k1 is None:
        k1 = f(t, y)
    k2 = f(t + h / 2, y + (h / 2) * k1)
    k3 = f(t + h / 2, y + (h / 2) * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def hermite(y0, y1, d0, d1, h: float, theta: float):
    """Cubic Hermite value and derivative at ``t0 + theta*h``."""
    t2 = theta * theta
    t3 = t2 * theta
    value = ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + theta) * h * d0
             + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * d1)
    deriv = ((6 * t2 - 6 * theta) * (y0 - y1) / h + (3 * t2 - 4 * theta + 1) * d0
             + (3 * t2 - 2 * theta) * d1)
    return value, deriv


def default_substeps(omega: float, delay_t: float, per_period: int = 64) -> int:
    """``max(per_period * ceil(delay * omega / 2 pi), per_period)`` steps per delay."""
    periods = math.ceil(delay_t * omega / (2 * math.pi) - 1e-9)
    return max(per_period * periods, per_period)


def commensurate_count(length: float, step: float, what: str) -> int:
    """Integer ``k`` with ``k * step == length`` to relative 1e-9, else ``ValueError``."""
    k = round(length / step)
    if k < 1 or abs(k * step - length) > _COMMENSURATE_TOL * max(length, step):
        raise ValueError(f"step {step!r} does not divide {what} {length!r}")
    return k


@dataclass(frozen=True)
class HistoryBuffer:
    """Dense record of an integration on the grid ``t_i = i * step``.

    ``derivatives`` holds right limits (the rhs values), ``derivatives_left``
    the left limits. ``history`` serves ``t < 0``.
    """

    step: float
    states: np.ndarray
    derivatives: np.ndarray
    derivatives_left: np.ndarray
    history: HistoryFn = field(repr=False)
    delays: tuple[float, ...] = ()

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.states)) * self.step

    @property
    def t_end(self) -> float:
        return (len(self.states) - 1) * self.step

    def __len__(self) -> int:
        return len(self.states)

    def sample(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """State and derivative at ``t``: exact on nodes, cubic Hermite between them."""
        if t < 0:
            y, d = self.history(t)
            return np.asarray(y, dtype=float), np.asarray(d, dtype=float)
        last = len(self.states) - 1
        x = t / self.step
        j = math.floor(x)
        if j > last or (j == last and x > last):
            raise ValueError(f"t={t!r} lies beyond the last grid time {self.t_end!r}")
        theta = x - j
        if theta == 0.0:
            return self.states[j].copy(), self.derivatives[j].copy()
        return hermite(self.states[j], self.states[j + 1], self.derivatives[j],
                       self.derivatives_left[j + 1], self.step, theta)

    def sample_many(self, ts: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        pairs = [self.sample(float(t)) for t in ts]
        return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])


def integrate(system: DelaySystem, horizon: float, step: float) -> HistoryBuffer:
    """Integrate ``system`` on ``[0, horizon]`` with fixed ``step``.

    ``step`` must divide every delay and the horizon. Raises
    :class:`NumericalError` on the first non-finite state.
    """
    if not (step > 0 and math.isfinite(step)):
        raise ValueError(f"step must be finite and > 0, got {step!r}")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    n_steps = 0 if horizon == 0 else commensurate_count(horizon, step, "horizon")
    lags = [commensurate_count(d, step, "delay") for d in system.delays]
    n_del = len(lags)
    dim = system.dimension
    h = step
    rhs = system.rhs
    history = system.history

    y_pre, d_pre = history(0.0)
    y_pre = np.asarray(y_pre, dtype=float)
    d_pre = np.asarray(d_pre, dtype=float)
    jump_at_zero = system.initial_state is not None
    states = np.empty((n_steps + 1, dim))
    d_right = np.empty((n_steps + 1, dim))
    d_left = np.empty((n_steps + 1, dim))
    states[0] = system.initial_state if jump_at_zero else y_pre
    d_left[0] = d_pre
    if not np.all(np.isfinite(states[0])):
        raise NumericalError("non-finite initial state", 0.0)

    def node(j: int, right: bool) -> tuple[np.ndarray, np.ndarray]:
        if j < 0:
            y, d = history(j * h)
            return np.asarray(y, dtype=float), np.asarray(d, dtype=float)
        if j == 0 and jump_at_zero and not right:
            return y_pre, d_pre
        return states[j], (d_right[j] if right else d_left[j])

    def delayed_at_node(i: int, right: bool) -> tuple[np.ndarray, np.ndarray]:
        ys = np.empty((n_del, dim))
        ds = np.empty((n_del, dim))
        for k, lag in enumerate(lags):
            ys[k], ds[k] = node(i - lag, right)
        return ys, ds

    def delayed_mid(i: int) -> tuple[np.ndarray, np.ndarray]:
        ys = np.empty((n_del, dim))
        ds = np.empty((n_del, dim))
        for k, lag in enumerate(lags):
            j = i - lag
            if j + 1 <= 0:
                y, d = history((j + 0.5) * h)
                ys[k], ds[k] = y, d
            else:
                y0, d0 = node(j, True)
                y1, d1 = node(j + 1, False)
                ys[k], ds[k] = hermite(y0, y1, d0, d1, h, 0.5)
        return ys, ds

    def node_derivatives(i: int) -> None:
        t = i * h
        yl, dl = delayed_at_node(i, right=False)
        yr, dr = delayed_at_node(i, right=True)
        d_left_i = rhs(t, states[i], yl, dl)
        if np.array_equal(dl, dr) and np.array_equal(yl, yr):
            d_right[i] = d_left_i
        else:
            d_right[i] = rhs(t, states[i], yr, dr)
        if i > 0:
            d_left[i] = d_left_i

    yr0, dr0 = delayed_at_node(0, right=True)
    d_right[0] = rhs(0.0, states[0], yr0, dr0)

    for i in range(n_steps):
        t_i = i * h
        mid = delayed_mid(i)
        end = delayed_at_node(i + 1, right=False)
        t_switch = t_i + 0.75 * h

        def stage(ts, ys, mid=mid, end=end, t_switch=t_switch):
            lag_y, lag_d = mid if ts < t_switch else end
            return rhs(ts, ys, lag_y, lag_d)

        states[i + 1] = rk4_step(stage, t_i, states[i], h, k1=d_right[i])
        if not np.all(np.isfinite(states[i + 1])):
            raise NumericalError(f"non-finite state in {system.name or 'system'}", (i + 1) * h)
        node_derivatives(i + 1)

    for arr in (states, d_right, d_left):
        arr.flags.writeable = False
    return HistoryBuffer(step=h, states=states, derivatives=d_right, derivatives_left=d_left,
                         history=history, delays=tuple(system.delays))
