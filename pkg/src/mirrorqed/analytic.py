"""Closed forms and the Laplace residue series of the single-charge mirror model.

Residue series
--------------
For ``p'' = -w0^2 p - g p' + g d/dt[p(t - T)]`` with ``p(0) = 1``,
``p'(0) = 0`` the Laplace image expands in powers of ``e^{-sT}``. With
``l(s) = (s - s_+)(s - s_-)``:

    held     (p = 1 for t < 0):  sum_n g^n s^n [(s + g) e^{-snT} - g e^{-s(n+1)T}] / l^{n+1}
    switched (p = 0 for t < 0):  sum_n g^n s^n (s + g) e^{-snT} / l^{n+1}

Each summand is inverted by residues at the two order-``n + 1`` poles. The
residue at ``s_+`` is the ``x^n`` Taylor coefficient of
``(x + u)^m (x + u + g)^e e^{x tau} / (x + d)^{n + 1}`` times ``e^{u tau}``,
with ``u = s_+``, ``d = s_+ - s_-``. That coefficient is a triple Cauchy
product of three known coefficient sequences, evaluated here in complex
log space so ``tau^c / c!`` never overflows.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .params import CircuitParams, classify_placement, derive

MAX_ORDER = 400
IMAG_TOL = 1e-6


class SeriesBreakdownError(ArithmeticError):
    """The residue series lost its conjugate symmetry or exceeded the order cap."""


@dataclass(frozen=True)
class ResidueSeriesParams:
    gamma_0: float
    omega_0: float
    delay_t: float

    def __post_init__(self):
        if not (self.gamma_0 >= 0 and math.isfinite(self.gamma_0)):
            raise ValueError(f"gamma_0 must be finite and >= 0, got {self.gamma_0!r}")
        if not self.omega_0 > 0:
            raise ValueError("omega_0 must be > 0")
        if not self.delay_t > 0:
            raise ValueError("delay_t must be > 0")
        if self.gamma_0 >= 2 * self.omega_0:
            raise ValueError("series is implemented for the underdamped case gamma_0 < 2 omega_0")

    @classmethod
    def from_params(cls, params: CircuitParams) -> "ResidueSeriesParams":
        d = derive(params)
        return cls(d.gamma_0, d.omega_0, params.delay_t)

    @property
    def alpha(self) -> complex:
        """``2 sqrt((g/2)^2 - w0^2)`` on the branch with positive imaginary part."""
        a = 2 * np.sqrt(complex((self.gamma_0 / 2) ** 2 - self.omega_0**2))
        return a if a.imag >= 0 else -a

    @property
    def roots(self) -> tuple[complex, complex]:
        half = -self.gamma_0 / 2
        return half + self.alpha / 2, half - self.alpha / 2


def _clog(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=complex))


def _logsumexp(logs: np.ndarray, axis: int = -1) -> np.ndarray:
    """``log(sum(exp(logs)))`` for complex logs; ``-inf`` real parts are skipped."""
    re = np.real(logs)
    top = np.max(np.where(np.isfinite(re), re, -np.inf), axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    total = np.sum(np.exp(logs - top), axis=axis)
    return _clog(total) + np.squeeze(top, axis=axis)


def _log_binom(n: np.ndarray, k: np.ndarray) -> np.ndarray:
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


@lru_cache(maxsize=4096)
def _pole_coefficients(n: int, m: int, e: int, u: complex, d: complex, g: float) -> np.ndarray:
    """Complex logs of ``P_k = [x^k] (x+u)^m (x+u+g)^e / (x+d)^{n+1}`` for ``k = 0..n``."""
    k = np.arange(n + 1)
    a = np.arange(m + 1)
    log_num = _log_binom(m, a) + (m - a) * _clog(u)
    if e:
        shifted = np.concatenate(([-np.inf + 0j], log_num))
        scaled = np.concatenate((log_num + _clog(u + g), [-np.inf + 0j]))
        log_num = _logsumexp(np.stack([scaled, shifted]), axis=0)
    log_num = np.concatenate((log_num, np.full(max(0, n + 1 - len(log_num)), -np.inf + 0j)))[: n + 1]
    log_den = _log_binom(n + k, k) + 1j * math.pi * (k % 2) - (n + 1 + k) * _clog(d)
    # Cauchy product P_j = sum_{a <= j} N_a D_{j-a}, one row per j
    diff = k[:, None] - k[None, :]
    pair = np.where(diff >= 0, log_num[None, :] + log_den[np.clip(diff, 0, n)], -np.inf + 0j)
    return _logsumexp(pair, axis=1)


def _pole_term(n: int, m: int, e: int, tau: np.ndarray, sp: ResidueSeriesParams) -> tuple[np.ndarray, np.ndarray]:
    """Sum over both poles of the residue of ``s^m (s+g)^e e^{s tau} / l^{n+1}``, times ``g^n``.

    Returns the complex value, split as (real part, imaginary part) so the
    caller can check conjugate symmetry.
    """
    g = sp.gamma_0
    s_plus, s_minus = sp.roots
    c = np.arange(n + 1)
    tau = np.asarray(tau, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_tau = np.log(tau)[:, None]
        log_e = np.where(c[None, :] == 0, 0.0, c[None, :] * log_tau) - gammaln(c + 1)[None, :]
    total = np.zeros(len(tau), dtype=complex)
    log_gn = n * math.log(g) if n else 0.0
    for u, w in ((s_plus, s_minus), (s_minus, s_plus)):
        log_p = _pole_coefficients(n, m, e, complex(u), complex(u - w), g)
        logs = log_p[::-1][None, :] + log_e  # P_{n-c} E_c
        total += np.exp(_logsumexp(logs, axis=1) + u * tau + log_gn)
    return total.real, total.imag


def _series(sp: ResidueSeriesParams, t: np.ndarray, history: str, derivative: bool) -> np.ndarray:
    if history not in ("held", "switched"):
        raise ValueError(f"history must be 'held' or 'switched', got {history!r}")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValueError("series needs finite t >= 0")
    if sp.gamma_0 == 0:
        w = sp.omega_0
        return -w * np.sin(w * t) if derivative else np.cos(w * t)
    big_t = sp.delay_t
    n_max = int(np.max(np.floor(t / big_t))) if len(t) else 0
    if n_max > MAX_ORDER:
        raise SeriesBreakdownError(f"series needs {n_max} reflections, cap is {MAX_ORDER}")
    extra = 1 if derivative else 0
    g = sp.gamma_0
    # one row of contributions per (n, kind); fsum per time keeps the total exact-rounded
    parts = []
    imag = np.zeros(len(t))
    for n in range(n_max + 1):
        shifts = [(n, 1, 1.0)]
        if history == "held":
            shifts.append((n + 1, 0, -g))
        for shift, e, weight in shifts:
            tau = t - shift * big_t
            live = tau >= 0
            row = np.zeros(len(t))
            if live.any():
                re, im = _pole_term(n, n + extra, e, tau[live], sp)
                row[live] = weight * re
                imag[live] += weight * im
            parts.append(row)
    worst = float(np.max(np.abs(imag))) if len(t) else 0.0
    if worst > IMAG_TOL:
        raise SeriesBreakdownError(f"imaginary residue {worst!r} exceeds {IMAG_TOL}")
    stacked = np.array(parts)
    return np.array([math.fsum(stacked[:, k]) for k in range(len(t))])


def residue_series_pj(sp: ResidueSeriesParams, t, history: str = "switched") -> np.ndarray:
    """``p_j(t) / p_j(0)`` from the residue series (``p_j'(0) = 0``).

    ``history="switched"`` is the expansion with ``p_j(t < 0) = 0``;
    ``"held"`` adds the terms for ``p_j(t < 0) = p_j(0)``. Right limits are
    returned on the reflection times.
    """
    return _series(sp, t, history, derivative=False)


def residue_series_state(sp: ResidueSeriesParams, t, history: str = "switched") -> tuple[np.ndarray, np.ndarray]:
    """``(p_j, dp_j/dt)`` normalized to ``p_j(0) = 1``."""
    return _series(sp, t, history, False), _series(sp, t, history, True)


def series_contributions(sp: ResidueSeriesParams, t: float, history: str = "switched") -> np.ndarray:
    """Individual residue terms that make up ``p_j(t)``, in order of reflection count.

    Only terms whose switch-on time ``n T`` has passed are listed.
    """
    if not t >= 0:
        raise ValueError("t must be >= 0")
    out = []
    for n in range(int(t // sp.delay_t) + 1):
        re, _ = _pole_term(n, n, 1, np.array([t - n * sp.delay_t]), sp)
        out.append(float(re[0]))
        if history == "held" and t >= (n + 1) * sp.delay_t:
            re, _ = _pole_term(n, n, 0, np.array([t - (n + 1) * sp.delay_t]), sp)
            out.append(-sp.gamma_0 * float(re[0]))
    return np.array(out)


def first_interval_pj(sp: ResidueSeriesParams, t) -> np.ndarray:
    """Damped oscillator solution valid before the first reflection returns."""
    t = np.asarray(t, dtype=float)
    g, w0 = sp.gamma_0, sp.omega_0
    omega = math.sqrt(w0**2 - g**2 / 4)
    return np.exp(-g * t / 2) * (np.cos(omega * t) + g / (2 * omega) * np.sin(omega * t))


def steady_state_amplitudes(params: CircuitParams) -> tuple[float, float]:
    """Long-time envelope amplitudes ``(p_j, p_0)`` relative to ``p_j(0)`` at a node."""
    d = derive(params)
    placement = classify_placement(d.omega_0, params.delay_t)
    if placement.kind != "node":
        raise ValueError(f"steady state is only defined at a node, got {placement}")
    pj = 1 / (1 + d.gamma_0 * params.delay_t / 2)
    return pj, -params.cap_ratio * pj


def open_tl_energy_closed_form(gamma: float, omega_0: float, t) -> np.ndarray:
    """Weak-damping energy ``e^{-g t}[1 + g/(2 w0) sin 2 w0 t + g^2/(4 w0^2) cos^2 w0 t]``."""
    ratio = gamma / omega_0
    if ratio >= 0.5:
        raise ValueError(f"closed form needs gamma/omega_0 < 0.5, got {ratio!r}")
    if ratio > 0.2:
        warnings.warn(f"gamma/omega_0 = {ratio:.3g} is outside the weak-damping regime", stacklevel=2)
    t = np.asarray(t, dtype=float)
    wt = omega_0 * t
    return np.exp(-gamma * t) * (1 + ratio / 2 * np.sin(2 * wt) + ratio**2 / 4 * np.cos(wt) ** 2)


def coupling_spectrum(gamma: float, omega_0: float, mirror_l_over_v: float, omega) -> tuple[np.ndarray, np.ndarray]:
    """Squared qubit-line coupling with the mirror and for the open line."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be > 0")
    base = gamma / (2 * math.pi) * omega / omega_0
    return base * np.sin(omega * mirror_l_over_v) ** 2, base / 2


def coupling_from_circuit(params: CircuitParams, mirror_l_over_v: float, omega) -> np.ndarray:
    """Squared coupling from the circuit constants, ``r^2 Z_0/(4 pi L_J) (w/w0) sin^2(w L/v)``."""
    omega = np.asarray(omega, dtype=float)
    w0 = derive(params).omega_0
    amp = params.cap_ratio * np.sqrt(params.z_0 / (4 * math.pi * params.l_j)) * np.sqrt(omega / w0)
    return (amp * np.sin(omega * mirror_l_over_v)) ** 2
