"""Brute-force LC-ladder model of the qubit, line and grounded mirror.

Node ``i`` sits at ``x = i * dx``; the qubit couples at node 0 and node
``N = L / dx`` is grounded. The left arm is a finite stretch of line that is
long enough for nothing reflected at its far (grounded) end to return to the
qubit within the horizon, so within that window it behaves as a semi-infinite
line. The junction is linearized.

State vector: ``[phi_J, p_J, phi_{-n_left} .. phi_{N-1}, p_{-n_left} .. p_{N-1}]``
where entry ``p_0`` is the coupling-node charge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dde import NumericalError, rk4_step
from .models import ModelKind, initial_state, qubit_energy
from .params import CircuitParams, derive
from .trajectory import Trajectory, config_hash

DEFAULT_MAX_NODES = 4_000_000


@dataclass(frozen=True)
class LatticeSystem:
    dx: float
    c0: float
    l0: float
    n_right: int
    n_left: int
    velocity: float
    mirror: bool = True

    @property
    def n_nodes(self) -> int:
        return self.n_left + self.n_right

    @property
    def coupling_slot(self) -> int:
        """Array index of node 0."""
        return self.n_left

    @property
    def positions(self) -> np.ndarray:
        return (np.arange(self.n_nodes) - self.n_left) * self.dx

    def split(self, state: np.ndarray) -> tuple[float, float, np.ndarray, np.ndarray]:
        m = self.n_nodes
        return state[0], state[1], state[2:2 + m], state[2 + m:]


def truncation_nodes(round_trip: float) -> int:
    """Left-arm length for a round trip of ``round_trip`` cells.

    The semi-discrete ladder leaks a dispersive precursor ahead of the light
    cone whose front spreads like ``n^(1/3)`` cells; the margin keeps its echo
    from the far end below double-precision rounding at the qubit.
    """
    half = round_trip / 2
    return math.floor(half) + 1 + math.ceil(8 * max(round_trip, 1.0) ** (1 / 3)) + 8


def build_lattice(params: CircuitParams, points_per_wavelength: int, horizon: float,
                  velocity: float | None = None, max_nodes: int = DEFAULT_MAX_NODES) -> LatticeSystem:
    """Discretize the line at ``points_per_wavelength`` nodes per qubit wavelength.

    ``dx`` is snapped so the mirror lands on a node. With ``delay_t = 0`` the
    right arm is sized like the left one, so no reflection returns in time.
    """
    if points_per_wavelength < 16:
        raise ValueError("points_per_wavelength must be >= 16")
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    v = velocity if velocity is not None else (params.v_0 or 1.0)
    w0 = derive(params).omega_0
    dx = 2 * math.pi * v / w0 / points_per_wavelength
    mirror = params.delay_t > 0
    if mirror:
        length = v * params.delay_t / 2
        n_right = max(1, round(length / dx))
        dx = length / n_right
    n_left = truncation_nodes(horizon * v / dx)
    if not mirror:
        n_right = n_left
    total = n_left + n_right
    if total > max_nodes:
        raise ValueError(f"lattice needs {total} nodes for horizon {horizon!r}, cap is {max_nodes}")
    z0 = params.z_0
    return LatticeSystem(dx=dx, c0=1 / (z0 * v), l0=z0 / v, n_right=n_right, n_left=n_left,
                         velocity=v, mirror=mirror)


def lattice_rhs(sys: LatticeSystem, params: CircuitParams):
    p = params
    m = sys.n_nodes
    k0 = sys.coupling_slot
    a = p.c_sum / (p.c_c * p.c_j)
    inv_cj = 1 / p.c_j
    inv_lj = 1 / p.l_j
    inv_cell_c = 1 / (sys.dx * sys.c0)
    inv_cell_l = 1 / (sys.l0 * sys.dx)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        phi_j, p_j = y[0], y[1]
        phi = y[2:2 + m]
        q = y[2 + m:]
        out = np.empty_like(y)
        out[0] = (p_j + q[k0]) * inv_cj
        out[1] = -phi_j * inv_lj
        dphi = out[2:2 + m]
        np.multiply(q, inv_cell_c, out=dphi)
        dphi[k0] = a * q[k0] + p_j * inv_cj
        lap = out[2 + m:]
        lap[1:-1] = phi[2:] - 2 * phi[1:-1] + phi[:-2]
        lap[0] = phi[1] - 2 * phi[0]
        lap[-1] = phi[-2] - 2 * phi[-1]
        lap *= inv_cell_l
        return out

    return rhs


def lattice_initial_state(sys: LatticeSystem, params: CircuitParams, initial: str = "charge") -> np.ndarray:
    """Qubit state matching the full continuum model's, with the line at rest."""
    p_j, q_j, p_0 = initial_state(params, ModelKind.FULL_MIRROR, initial)
    y = np.zeros(2 + 2 * sys.n_nodes)
    y[0] = -params.l_j * q_j
    y[1] = p_j
    y[2 + sys.n_nodes + sys.coupling_slot] = p_0
    return y


def lattice_energy(sys: LatticeSystem, params: CircuitParams, state: np.ndarray) -> tuple[float, float]:
    """``(qubit energy, line energy)``; links to both grounded ends are included."""
    phi_j, p_j, phi, q = sys.split(state)
    k0 = sys.coupling_slot
    qubit = float(qubit_energy(np.array([p_j, -phi_j / params.l_j, q[k0]]), params, ModelKind.FULL_MIRROR))
    charges = np.delete(q, k0)
    links = np.diff(np.concatenate(([0.0], phi, [0.0])))
    line = float(np.sum(charges**2) / (2 * sys.c0 * sys.dx) + np.sum(links**2) / (2 * sys.l0 * sys.dx))
    return qubit, line


def default_lattice_step(sys: LatticeSystem, params: CircuitParams) -> float:
    """Half the CFL limit, also resolving the coupling node's local oscillation.

    The ladder has no resistor, so the continuum relaxation rate plays no
    role here; the node's LC frequency is its stiffest mode.
    """
    h = 0.5 * sys.dx / sys.velocity
    c_node = params.c_c * params.c_j / params.c_sum
    w_node = 1 / math.sqrt(c_node * sys.l0 * sys.dx / 2)
    w_j = derive(params).omega_j
    return min(h, 1 / w_node, 2 * math.pi / w_j / 64)


@dataclass
class LatticeResult:
    system: LatticeSystem
    trajectory: Trajectory
    states: np.ndarray | None = None  # full state on the output grid when kept


def integrate_lattice(sys: LatticeSystem, params: CircuitParams, horizon: float, step: float | None = None,
                      stride: int = 1, initial: str = "charge", keep_states: bool = False) -> LatticeResult:
    """RK4 on the ladder; outputs every ``stride`` steps.

    The step is shrunk so it divides ``horizon``. Columns: ``p_j``, ``q_j``,
    ``p_0``, ``phi_j``, ``e``, ``e_norm``, ``e_line``.
    """
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    cfl = 0.5 * sys.dx / sys.velocity
    if step is None:
        step = default_lattice_step(sys, params)
    elif step > cfl * (1 + 1e-12):
        raise ValueError(f"step {step!r} exceeds the stability limit 0.5*dx/v = {cfl!r}")
    n = math.ceil(horizon / step - 1e-9)
    h = horizon / n
    if stride < 1:
        raise ValueError("stride must be >= 1")
    rhs = lattice_rhs(sys, params)
    y = lattice_initial_state(sys, params, initial)
    out_idx = list(range(0, n + 1, stride))
    if out_idx[-1] != n:
        out_idx.append(n)
    k0 = sys.coupling_slot
    m = sys.n_nodes
    rows = []
    kept = []

    def record(y):
        q, e_line = lattice_energy(sys, params, y)
        rows.append((y[1], -y[0] / params.l_j, y[2 + m + k0], y[0], q, e_line))
        if keep_states:
            kept.append(y.copy())

    record(y)
    next_out = 1
    with np.errstate(over="ignore", invalid="ignore"):  # blow-up is reported below
        for i in range(n):
            y = rk4_step(rhs, i * h, y, h)
            if not np.all(np.isfinite(y)):
                bad = int(np.flatnonzero(~np.isfinite(y))[0])
                raise NumericalError(f"non-finite lattice state at entry {bad}", (i + 1) * h)
            if next_out < len(out_idx) and out_idx[next_out] == i + 1:
                record(y)
                next_out += 1
    data = np.array(rows)
    times = np.array(out_idx) * h
    cols = {
        "p_j": data[:, 0],
        "q_j": data[:, 1],
        "p_0": data[:, 2],
        "phi_j": data[:, 3],
        "e": data[:, 4],
        "e_norm": data[:, 4] / data[0, 4],
        "e_line": data[:, 5],
    }
    meta = {
        "model": "lattice",
        "params_hash": config_hash(params.as_dict()),
        "step": h,
        "horizon": horizon,
        "dx": sys.dx,
        "n_right": sys.n_right,
        "n_left": sys.n_left,
    }
    return LatticeResult(sys, Trajectory(times, cols, meta), np.array(kept) if keep_states else None)


def field_snapshot(result: LatticeResult, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(x_i, phi_i, p_i / dx)`` at an output time of a run made with ``keep_states``."""
    if result.states is None:
        raise ValueError("run the lattice with keep_states=True to take snapshots")
    times = result.trajectory.times
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"t={t!r} is not on the output grid")
    sys = result.system
    _, _, phi, q = sys.split(result.states[k])
    return sys.positions, phi.copy(), q / sys.dx
