"""Circuit constants, derived rates and parameter builders.

All quantities are SI-coherent. A :class:`DimensionlessSpec` with
``omega_0 = 1`` and ``capacitance_scale = 1`` gives the natural-unit mode in
which ``C_c + C_J = 1`` and ``L_J = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.optimize import brentq

PLACEMENT_TOL = 1e-9


@dataclass(frozen=True)
class Placement:
    """Qubit position relative to the standing wave at ``omega_0``.

    ``kind`` is one of ``"node"`` (``omega_0 T = 2 pi n``), ``"antinode"``
    (``omega_0 T = (2n + 1) pi``), ``"generic"`` or ``"open"`` (no mirror).
    """

    kind: str
    order: int = 0

    @classmethod
    def node(cls, n: int) -> "Placement":
        return cls("node", int(n))

    @classmethod
    def antinode(cls, n: int) -> "Placement":
        return cls("antinode", int(n))

    def __str__(self) -> str:
        if self.kind in ("node", "antinode"):
            return f"{self.kind}({self.order})"
        return self.kind


@dataclass(frozen=True)
class CircuitParams:
    """Physical constants of one transmon-mirror experiment.

    ``delay_t = 0`` encodes the open transmission line. ``v_0`` is optional
    and only used to turn the delay into a mirror distance.
    """

    c_j: float
    c_c: float
    l_j: float
    z_0: float
    delay_t: float = 0.0
    v_0: float | None = None

    def __post_init__(self):
        for name in ("c_j", "c_c", "l_j", "z_0"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if not (math.isfinite(self.delay_t) and self.delay_t >= 0):
            raise ValueError(f"delay_t must be finite and >= 0, got {self.delay_t!r}")
        if self.v_0 is not None and not (self.v_0 > 0):
            raise ValueError(f"v_0 must be > 0, got {self.v_0!r}")

    @property
    def c_sum(self) -> float:
        return self.c_c + self.c_j

    @property
    def cap_ratio(self) -> float:
        return self.c_c / self.c_sum

    @property
    def mirror_distance(self) -> float | None:
        """``L = v_0 T / 2``, or ``None`` when no velocity is known."""
        if self.v_0 is None:
            return None
        return self.v_0 * self.delay_t / 2

    def with_delay(self, delay_t: float) -> "CircuitParams":
        return CircuitParams(self.c_j, self.c_c, self.l_j, self.z_0, delay_t, self.v_0)

    def as_dict(self) -> dict:
        return {
            "c_j": self.c_j,
            "c_c": self.c_c,
            "l_j": self.l_j,
            "z_0": self.z_0,
            "delay_t": self.delay_t,
            "v_0": self.v_0,
        }


@dataclass(frozen=True)
class DimensionlessSpec:
    """Experiment described by ratios instead of raw circuit values.

    Exactly how the delay is fixed:

    * ``roundtrips`` alone: ``omega_0 T = 2 pi * roundtrips``. Integers are
      nodes of order ``roundtrips``, half-integers are antinodes.
    * ``gamma0_t`` alone: ``T = gamma0_t / gamma_0``.
    * both, with ``cap_ratio=None``: the placement comes from ``roundtrips``
      and ``cap_ratio`` is solved so that ``gamma_0 T`` equals ``gamma0_t``.
    * neither: open line (``T = 0``).
    """

    omega_0: float
    cap_ratio: float | None
    imp_ratio: float
    roundtrips: float | None = None
    gamma0_t: float | None = None
    capacitance_scale: float = 1.0
    v_0: float | None = None

    def __post_init__(self):
        if not (self.omega_0 > 0):
            raise ValueError(f"omega_0 must be > 0, got {self.omega_0!r}")
        if not (self.imp_ratio > 0):
            raise ValueError(f"imp_ratio must be > 0, got {self.imp_ratio!r}")
        if self.cap_ratio is None:
            if self.roundtrips is None or self.gamma0_t is None:
                raise ValueError("cap_ratio may only be omitted when both roundtrips and gamma0_t are given")
        elif not (0 < self.cap_ratio < 1):
            raise ValueError(f"cap_ratio must lie in (0, 1), got {self.cap_ratio!r}")
        if self.roundtrips is not None and not (self.roundtrips > 0):
            raise ValueError(f"roundtrips must be > 0, got {self.roundtrips!r}")
        if self.gamma0_t is not None and not (self.gamma0_t > 0):
            raise ValueError(f"gamma0_t must be > 0, got {self.gamma0_t!r}")
        if not (self.capacitance_scale > 0):
            raise ValueError("capacitance_scale must be > 0")


@dataclass(frozen=True)
class DerivedQuantities:
    omega_j: float
    omega_0: float
    z_j: float
    eta: float
    gamma_full: float
    gamma_0: float
    placement: Placement = field(default_factory=lambda: Placement("open"))
    roundtrips: float = 0.0  # omega_0 T / 2 pi

    @property
    def gamma0_t(self) -> float:
        return self.gamma_0 * 2 * math.pi * self.roundtrips / self.omega_0


def coupling_ratio(cap_ratio: float, imp_ratio: float) -> float:
    """``gamma_0 / omega_0 = (z / 2) r^2 / sqrt(1 - r)``."""
    return imp_ratio / 2 * cap_ratio**2 / math.sqrt(1 - cap_ratio)


def solve_cap_ratio(gamma0_over_omega0: float, imp_ratio: float) -> float:
    """Capacitance ratio giving the requested low-impedance coupling.

    ``coupling_ratio`` is strictly increasing in ``r`` on (0, 1) and spans
    (0, inf), so the root is unique.
    """
    if not (gamma0_over_omega0 > 0 and imp_ratio > 0):
        raise ValueError("coupling and impedance ratio must be > 0")
    target = math.log(gamma0_over_omega0)
    return brentq(
        lambda r: math.log(coupling_ratio(r, imp_ratio)) - target,
        1e-150,
        1 - 1e-15,
        xtol=1e-300,
        rtol=1e-15,
        maxiter=500,
    )


def build_params(spec: DimensionlessSpec) -> CircuitParams:
    """Invert the ratio definitions into raw circuit constants."""
    w0 = spec.omega_0
    r = spec.cap_ratio
    if r is None:
        r = solve_cap_ratio(spec.gamma0_t / (2 * math.pi * spec.roundtrips), spec.imp_ratio)
    c_sum = spec.capacitance_scale
    c_c = r * c_sum
    c_j = (1 - r) * c_sum
    l_j = 1 / (w0**2 * c_sum)
    z_j = math.sqrt(l_j / c_j)
    z_0 = spec.imp_ratio * z_j

    if spec.roundtrips is not None:
        delay_t = 2 * math.pi * spec.roundtrips / w0
    elif spec.gamma0_t is not None:
        gamma_0 = coupling_ratio(r, spec.imp_ratio) * w0
        delay_t = spec.gamma0_t / gamma_0
    else:
        delay_t = 0.0
    return CircuitParams(c_j=c_j, c_c=c_c, l_j=l_j, z_0=z_0, delay_t=delay_t, v_0=spec.v_0)


def eta_at(params: CircuitParams, omega: float) -> float:
    """Impedance-coupling parameter ``omega^2 Z_0^2 C_c^2 / 4 * C_J / (C_J + C_c)``."""
    p = params
    return omega**2 * p.z_0**2 * p.c_c**2 / 4 * p.c_j / p.c_sum


def open_decay_rate(params: CircuitParams, omega: float) -> float:
    """Weak-damping open-line rate ``2/(Z_0 C_J) * eta/(1 + eta)`` at ``omega``."""
    eta = eta_at(params, omega)
    return 2 / (params.z_0 * params.c_j) * eta / (1 + eta)


def classify_placement(omega_0: float, delay_t: float, tol: float = PLACEMENT_TOL) -> Placement:
    if delay_t == 0:
        return Placement("open")
    x = omega_0 * delay_t / math.pi
    m = round(x)
    if m >= 1 and abs(x - m) <= tol:
        return Placement.node(m // 2) if m % 2 == 0 else Placement.antinode((m - 1) // 2)
    return Placement("generic")


def derive(params: CircuitParams) -> DerivedQuantities:
    p = params
    omega_j = 1 / math.sqrt(p.l_j * p.c_j)
    omega_0 = 1 / math.sqrt(p.l_j * p.c_sum)
    z_j = math.sqrt(p.l_j / p.c_j)
    eta = eta_at(p, omega_j)
    gamma_full = omega_j * 2 * (z_j / p.z_0) * eta / (1 + eta)
    gamma_0 = p.z_0 / 2 * omega_0**2 * p.c_c**2 / p.c_sum
    return DerivedQuantities(
        omega_j=omega_j,
        omega_0=omega_0,
        z_j=z_j,
        eta=eta,
        gamma_full=gamma_full,
        gamma_0=gamma_0,
        placement=classify_placement(omega_0, p.delay_t),
        roundtrips=omega_0 * p.delay_t / (2 * math.pi),
    )


def dark_state_energy_ratio(gamma_0: float, delay_t: float) -> float:
    """Fraction of the initial energy trapped in the dark state, ``1/(1 + gamma_0 T/2)^2``."""
    if gamma_0 < 0 or delay_t < 0:
        raise ValueError("gamma_0 and delay_t must be >= 0")
    return 1 / (1 + gamma_0 * delay_t / 2) ** 2


def delay_for_placement(omega_0: float, kind: str, order_n: int) -> float:
    if not (omega_0 > 0):
        raise ValueError("omega_0 must be > 0")
    if kind == "node":
        if order_n < 1:
            raise ValueError("node order must be >= 1 (order 0 is the open line)")
        return 2 * math.pi * order_n / omega_0
    if kind == "antinode":
        if order_n < 0:
            raise ValueError("antinode order must be >= 0")
        return (2 * order_n + 1) * math.pi / omega_0
    raise ValueError(f"unknown placement kind {kind!r}")
