"""Qubit-mirror dynamical models as delay systems, plus their observables.

State layouts:

* full_mirror, open_full: ``(p_j, q_j, p_0)`` with ``q_j = dp_j/dt``
* approx_mirror, open_approx: ``(p_j, q_j)``
* system_reservoir: ``(re c, im c)``

The flux is never stored: ``phi_j = -l_j * q_j``. Initial amplitudes are
scaled so that the qubit energy at ``t = 0`` is one energy unit.

Initial-condition variants (``initial=``):

* ``"charge"``: finite ``p_j``, no current. In the full models the coupling
  node starts at its relaxed value ``p_0 = -C_c/(C_c + C_J) p_j`` and has held
  it for all ``t < 0``.
* ``"bare"``: finite ``p_j`` with ``p_0 = 0`` for ``t <= 0``. The coupling
  node then relaxes within the first ``Z_0 C`` time and the qubit loses a
  fraction ``C_c/(C_c + C_J)`` of its energy in that transient.
* ``"flux"``: finite ``phi_j`` (a quarter period later in the oscillation).

The approx mirror model accepts two pre-histories for ``p_j``: ``"held"``
(``p_j(t<0) = p_j(0)``, continuous) and ``"switched"`` (``p_j(t<0) = 0``).
With ``"switched"`` the reflected term switches on abruptly at ``t = T``
and kicks ``q_j`` by ``gamma p_j(0)``.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .dde import DelaySystem, HistoryBuffer, default_substeps, integrate
from .params import CircuitParams, derive
from .trajectory import Trajectory, config_hash

INITIAL_CONDITIONS = ("charge", "bare", "flux")
APPROX_HISTORIES = ("held", "switched")

# RK4 resolution floor for the fast coupling-node relaxation: h * rate <= this
RELAX_STEP_LIMIT = 1.0


class ModelKind(str, enum.Enum):
    FULL_MIRROR = "full_mirror"
    APPROX_MIRROR = "approx_mirror"
    OPEN_FULL = "open_full"
    OPEN_APPROX = "open_approx"
    SYSTEM_RESERVOIR = "system_reservoir"

    @classmethod
    def parse(cls, name: "str | ModelKind") -> "ModelKind":
        if isinstance(name, cls):
            return name
        key = str(name).replace("-", "_").lower()
        aliases = {
            "fullmirror": cls.FULL_MIRROR,
            "approxmirror": cls.APPROX_MIRROR,
            "openfull": cls.OPEN_FULL,
            "openapprox": cls.OPEN_APPROX,
            "systemreservoir": cls.SYSTEM_RESERVOIR,
            "sysres": cls.SYSTEM_RESERVOIR,
        }
        for kind in cls:
            if kind.value == key:
                return kind
        if key.replace("_", "") in aliases:
            return aliases[key.replace("_", "")]
        raise ValueError(f"unknown model {name!r}; expected one of {[k.value for k in cls]}")

    @property
    def delayed(self) -> bool:
        return self in (ModelKind.FULL_MIRROR, ModelKind.APPROX_MIRROR, ModelKind.SYSTEM_RESERVOIR)

    @property
    def full(self) -> bool:
        return self in (ModelKind.FULL_MIRROR, ModelKind.OPEN_FULL)

    @property
    def state_names(self) -> tuple[str, ...]:
        if self.full:
            return ("p_j", "q_j", "p_0")
        if self is ModelKind.SYSTEM_RESERVOIR:
            return ("re_c", "im_c")
        return ("p_j", "q_j")


def relaxation_rate(params: CircuitParams) -> float:
    """Rate at which ``p_0`` relaxes towards ``-C_c/(C_c+C_J) p_j`` in the full models."""
    p = params
    return 2 / p.z_0 * p.c_sum / (p.c_c * p.c_j)


def resolve_gamma(params: CircuitParams, gamma: "float | str | None") -> float:
    """``None``/"gamma_0" -> gamma_0, "gamma_full" -> gamma_full, numbers pass through."""
    d = derive(params)
    if gamma is None or gamma == "gamma_0":
        return d.gamma_0
    if gamma == "gamma_full":
        return d.gamma_full
    if isinstance(gamma, str):
        raise ValueError(f"unknown gamma selector {gamma!r}")
    g = float(gamma)
    if not (g >= 0 and math.isfinite(g)):
        raise ValueError(f"gamma must be finite and >= 0, got {gamma!r}")
    return g


def initial_state(params: CircuitParams, kind: ModelKind, initial: str = "charge") -> np.ndarray:
    """State at ``t = 0`` normalized to unit qubit energy."""
    kind = ModelKind.parse(kind)
    if initial not in INITIAL_CONDITIONS:
        raise ValueError(f"initial must be one of {INITIAL_CONDITIONS}, got {initial!r}")
    p = params
    if kind is ModelKind.SYSTEM_RESERVOIR:
        return np.array([1.0, 0.0])
    if initial == "flux":
        q = -math.sqrt(2 / p.l_j)
        return np.array([0.0, q, 0.0]) if kind.full else np.array([0.0, q])
    if not kind.full:
        return np.array([math.sqrt(2 * p.c_sum), 0.0])
    if initial == "bare":
        return np.array([math.sqrt(2 * p.c_j), 0.0, 0.0])
    charge = math.sqrt(2 * p.c_sum)
    return np.array([charge, 0.0, -p.cap_ratio * charge])


def _constant_history(state: np.ndarray):
    state = np.array(state, dtype=float)
    zero = np.zeros_like(state)

    def history(t):
        return state, zero

    return history


def _full_rhs(params: CircuitParams, delayed: bool):
    p = params
    wj2 = 1 / (p.l_j * p.c_j)
    a = relaxation_rate(p)
    b = 2 / (p.z_0 * p.c_j)

    if delayed:
        def rhs(t, y, yd, dd):
            pj, qj, p0 = y
            return np.array([qj, -wj2 * (p0 + pj), dd[0, 2] - a * p0 - b * pj])
    else:
        def rhs(t, y, yd, dd):
            pj, qj, p0 = y
            return np.array([qj, -wj2 * (p0 + pj), -a * p0 - b * pj])
    return rhs


def full_mirror_system(params: CircuitParams, initial: str = "charge") -> DelaySystem:
    """Neutral DDE for the qubit and coupling-node charges in front of the mirror."""
    if not params.delay_t > 0:
        raise ValueError("full_mirror needs delay_t > 0")
    y0 = initial_state(params, ModelKind.FULL_MIRROR, initial)
    return DelaySystem(3, _full_rhs(params, True), _constant_history(y0), delays=(params.delay_t,),
                       neutral=True, name="full_mirror")


def open_full_system(params: CircuitParams, initial: str = "charge") -> DelaySystem:
    y0 = initial_state(params, ModelKind.OPEN_FULL, initial)
    return DelaySystem(3, _full_rhs(params, False), _constant_history(y0), name="open_full")


def approx_mirror_system(params: CircuitParams, gamma: "float | str | None" = None,
                         initial: str = "charge", history: str = "held") -> DelaySystem:
    """Single-charge retarded model ``q' = -w0^2 p - g (q - q(t-T))``.

    With ``history="switched"`` the state is ``(p_j, u)`` where
    ``u = q_j - g p_j(t - T)``; this keeps the impulse at ``t = T`` out of the
    integrated variables. Use :func:`approx_charge_rate` to recover ``q_j``.
    """
    if not params.delay_t > 0:
        raise ValueError("approx_mirror needs delay_t > 0")
    if history not in APPROX_HISTORIES:
        raise ValueError(f"history must be one of {APPROX_HISTORIES}, got {history!r}")
    w02 = derive(params).omega_0 ** 2
    g = resolve_gamma(params, gamma)
    y0 = initial_state(params, ModelKind.APPROX_MIRROR, initial)
    if history == "held":
        def rhs(t, y, yd, dd):
            pj, qj = y
            return np.array([qj, -w02 * pj - g * (qj - yd[0, 1])])

        pre = np.array([y0[0], 0.0])
        return DelaySystem(2, rhs, _constant_history(pre), delays=(params.delay_t,),
                           initial_state=y0, name="approx_mirror")

    def rhs_switched(t, y, yd, dd):
        pj, u = y
        pd = yd[0, 0]
        return np.array([u + g * pd, -w02 * pj - g * u - g * g * pd])

    return DelaySystem(2, rhs_switched, _constant_history(np.zeros(2)), delays=(params.delay_t,),
                       initial_state=y0, name="approx_mirror_switched")


def approx_charge_rate(buffer: HistoryBuffer, gamma: float, delay_t: float) -> np.ndarray:
    """``q_j`` on the grid of a ``history="switched"`` approx run (right limits)."""
    lag = round(delay_t / buffer.step)
    p = buffer.states[:, 0]
    delayed = np.zeros_like(p)
    delayed[lag:] = p[: len(p) - lag]
    return buffer.states[:, 1] + gamma * delayed


def open_approx_system(params: CircuitParams, gamma: "float | str | None" = None,
                       initial: str = "charge") -> DelaySystem:
    w02 = derive(params).omega_0 ** 2
    g = resolve_gamma(params, gamma)
    y0 = initial_state(params, ModelKind.OPEN_APPROX, initial)

    def rhs(t, y, yd, dd):
        pj, qj = y
        return np.array([qj, -w02 * pj - g * qj])

    return DelaySystem(2, rhs, _constant_history(y0), name="open_approx")


def system_reservoir_system(gamma: float, delay_t: float, phase: float) -> DelaySystem:
    """Single-excitation amplitude ``c' = -(g/2)(c - exp(-i phase) c(t - T))``, ``c(t<0) = 0``."""
    if not (gamma >= 0 and math.isfinite(gamma)):
        raise ValueError(f"gamma must be finite and >= 0, got {gamma!r}")
    if not delay_t > 0:
        raise ValueError("system_reservoir needs delay_t > 0")
    half = gamma / 2
    cs, sn = math.cos(phase), math.sin(phase)

    def rhs(t, y, yd, dd):
        x, v = y
        xd, vd = yd[0]
        return np.array([-half * (x - (xd * cs + vd * sn)), -half * (v - (vd * cs - xd * sn))])

    return DelaySystem(2, rhs, _constant_history(np.zeros(2)), delays=(delay_t,),
                       initial_state=np.array([1.0, 0.0]), name="system_reservoir")


def mirror_phase(omega_0: float, delay_t: float) -> float:
    """``omega_0 T mod 2 pi`` snapped to 0 or pi within the placement tolerance."""
    phi = math.fmod(omega_0 * delay_t, 2 * math.pi)
    for target in (0.0, math.pi, 2 * math.pi):
        if abs(phi - target) <= 1e-9 * max(1.0, omega_0 * delay_t):
            return math.fmod(target, 2 * math.pi)
    return phi


def qubit_energy(state: np.ndarray, params: CircuitParams, kind: "ModelKind | str",
                 e0: float = 1.0) -> np.ndarray:
    """Qubit energy for one state vector or a stack of them (last axis = components)."""
    kind = ModelKind.parse(kind)
    s = np.asarray(state, dtype=float)
    if s.shape[-1] != len(kind.state_names):
        raise ValueError(f"{kind.value} state has {len(kind.state_names)} components, got {s.shape[-1]}")
    p = params
    if kind is ModelKind.SYSTEM_RESERVOIR:
        return (s[..., 0] ** 2 + s[..., 1] ** 2) * e0
    phi = -p.l_j * s[..., 1]
    inductive = phi**2 / (2 * p.l_j)
    if kind.full:
        pj, p0 = s[..., 0], s[..., 2]
        return (pj + p0) ** 2 / (2 * p.c_j) + p0**2 / (2 * p.c_c) + inductive
    return s[..., 0] ** 2 / (2 * p.c_sum) + inductive


def emitted_fields(buffer: HistoryBuffer, params: CircuitParams, kind: "ModelKind | str") -> dict:
    """Outgoing voltages and cumulative radiated energy on the buffer grid.

    Only the left-moving output leaves a mirrored line; the right-moving one
    returns after ``T`` and is already inside ``dp_0/dt(t - T)``.
    """
    kind = ModelKind.parse(kind)
    if not kind.full:
        raise ValueError(f"emitted fields need a full model, got {kind.value}")
    z0 = params.z_0
    dp0 = buffer.derivatives[:, 2]
    if kind is ModelKind.OPEN_FULL:
        v_l = -(z0 / 2) * dp0
        v_r = v_l.copy()
        power = (v_l**2 + v_r**2) / z0
    else:
        lag = round(params.delay_t / buffer.step)
        delayed = np.zeros_like(dp0)
        delayed[lag:] = dp0[: len(dp0) - lag]
        v_l = (z0 / 2) * (delayed - dp0)
        v_r = -(z0 / 2) * dp0
        power = v_l**2 / z0
    radiated = np.concatenate(([0.0], np.cumsum((power[1:] + power[:-1]) * buffer.step / 2)))
    return {"v_l_out": v_l, "v_r_out": v_r, "radiated_energy": radiated}


def period_average(times: np.ndarray, values: np.ndarray, period: float) -> tuple[np.ndarray, np.ndarray]:
    """Sliding mean over one ``period``; returns window centres and means."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if not period > 0:
        raise ValueError("period must be > 0")
    if times[-1] - times[0] < period:
        return np.empty(0), np.empty(0)
    cum = np.concatenate(([0.0], np.cumsum((values[1:] + values[:-1]) * np.diff(times) / 2)))
    starts = times[times + period <= times[-1] + 1e-12 * period]
    upper = np.interp(starts + period, times, cum)
    lower = np.interp(starts, times, cum)
    return starts + period / 2, (upper - lower) / period


def fit_decay_rate(times: np.ndarray, energy: np.ndarray, period: float,
                   window: tuple[float, float] | None = None) -> float:
    """Decay rate from a log-linear fit of the period-averaged energy.

    The first and last period of the averaged series are dropped; ``window``
    further restricts the fit to window centres in ``[t0, t1]``.
    """
    centres, avg = period_average(times, energy, period)
    if len(centres) == 0:
        raise ValueError("series shorter than one period")
    keep = (centres >= centres[0] + period) & (centres <= centres[-1] - period)
    if window is not None:
        keep &= (centres >= window[0]) & (centres <= window[1])
    keep &= avg > 0
    if np.count_nonzero(keep) < 2:
        raise ValueError("not enough samples in the fit window")
    slope, _ = np.polyfit(centres[keep], np.log(avg[keep]), 1)
    return -float(slope)


def choose_step(params: CircuitParams, kind: "ModelKind | str", horizon: float,
                substeps: int | None = None, per_period: int = 64,
                gamma: float | None = None) -> tuple[float, int]:
    """Step and step count for a run of length ``horizon``.

    Delayed models step ``T / K``; ``K`` defaults to ``per_period`` steps per
    qubit period (at the larger of ``omega_0`` and ``omega_j``) and is raised
    until ``h * relaxation_rate <= 1``. The horizon is rounded up to a whole
    number of steps.
    """
    kind = ModelKind.parse(kind)
    d = derive(params)
    omega = d.omega_j if kind.full else d.omega_0
    if kind.delayed:
        t = params.delay_t
        if substeps is None:
            k = default_substeps(omega, t, per_period)
            if kind.full:
                k = max(k, math.ceil(t * relaxation_rate(params) / RELAX_STEP_LIMIT))
            if kind is ModelKind.SYSTEM_RESERVOIR and gamma is not None:
                k = max(k, math.ceil(16 * gamma * t))
        else:
            k = int(substeps)
            if k < 1:
                raise ValueError("substeps must be >= 1")
        h = t / k
        n = max(1, math.ceil(horizon / h - 1e-9))
        return h, n
    if substeps is not None:
        h_max = 2 * math.pi / omega / int(substeps)
    else:
        h_max = 2 * math.pi / omega / per_period
        if kind.full:
            h_max = min(h_max, RELAX_STEP_LIMIT / relaxation_rate(params))
    n = max(1, math.ceil(horizon / h_max - 1e-9))
    return horizon / n, n


def simulate(params: CircuitParams, kind: "ModelKind | str", horizon: float, *,
             substeps: int | None = None, per_period: int = 64, initial: str = "charge",
             gamma: "float | str | None" = None, history: str = "held",
             fields: bool = False, stride: int = 1) -> Trajectory:
    """Integrate one model and return its observables on the output grid.

    Columns: the state components, ``phi_j``, ``e`` and ``e_norm`` for charge
    models; ``re_c``, ``im_c``, ``occupation`` for the system-reservoir model.
    ``fields=True`` adds ``v_l_out``, ``v_r_out``, ``radiated_energy`` for
    the full models.
    """
    kind = ModelKind.parse(kind)
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    g = resolve_gamma(params, gamma) if not kind.full else None
    d = derive(params)
    if kind is ModelKind.FULL_MIRROR:
        system = full_mirror_system(params, initial)
    elif kind is ModelKind.OPEN_FULL:
        system = open_full_system(params, initial)
    elif kind is ModelKind.APPROX_MIRROR:
        system = approx_mirror_system(params, g, initial, history)
    elif kind is ModelKind.OPEN_APPROX:
        system = open_approx_system(params, g, initial)
    else:
        system = system_reservoir_system(g, params.delay_t, mirror_phase(d.omega_0, params.delay_t))
    h, n = choose_step(params, kind, horizon, substeps, per_period, g)
    buffer = integrate(system, n * h, h)

    states = buffer.states
    if kind is ModelKind.APPROX_MIRROR and history == "switched":
        states = np.column_stack([states[:, 0], approx_charge_rate(buffer, g, params.delay_t)])
    cols: dict[str, np.ndarray] = {}
    if kind is ModelKind.SYSTEM_RESERVOIR:
        cols["re_c"] = states[:, 0]
        cols["im_c"] = states[:, 1]
        cols["occupation"] = qubit_energy(states, params, kind)
    else:
        for k, name in enumerate(kind.state_names):
            cols[name] = states[:, k]
        cols["phi_j"] = -params.l_j * states[:, 1] + 0.0
        e = qubit_energy(states, params, kind)
        cols["e"] = e
        cols["e_norm"] = e / e[0]
        if fields and kind.full:
            cols.update(emitted_fields(buffer, params, kind))
    meta = {
        "model": kind.value,
        "params_hash": config_hash(params.as_dict()),
        "step": h,
        "horizon": n * h,
        "initial": initial,
    }
    if g is not None:
        meta["gamma"] = g
    if kind is ModelKind.APPROX_MIRROR:
        meta["history"] = history
    traj = Trajectory(buffer.times, cols, meta)
    return traj.strided(stride) if stride > 1 else traj
