import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mirrorqed.analytic import (
    MAX_ORDER,
    ResidueSeriesParams,
    SeriesBreakdownError,
    coupling_from_circuit,
    coupling_spectrum,
    first_interval_pj,
    open_tl_energy_closed_form,
    residue_series_pj,
    residue_series_state,
    series_contributions,
    steady_state_amplitudes,
)
from mirrorqed.models import simulate
from mirrorqed.params import dark_state_energy_ratio, derive

from conftest import LOW_Z, node_params, ratio_params

SP = ResidueSeriesParams(0.02, 1.0, 10 * math.pi)


def laplace_image(sp, history):
    g, w, big_t = mp.mpf(sp.gamma_0), mp.mpf(sp.omega_0), mp.mpf(sp.delay_t)

    def image(s):
        echo = mp.exp(-s * big_t)
        num = s + g - (g * echo if history == "held" else 0)
        return num / (s**2 + g * s * (1 - echo) + w**2)

    return image


def residue_oracle(sp, n, t):
    """Term ``n`` of the switched expansion by direct differentiation at both poles."""
    with mp.workdps(40):
        return _residue_oracle(sp, n, t)


def _residue_oracle(sp, n, t):
    g, w = mp.mpf(sp.gamma_0), mp.mpf(sp.omega_0)
    tau = mp.mpf(t) - n * mp.mpf(sp.delay_t)
    root = mp.sqrt(g**2 / 4 - w**2)
    poles = (-g / 2 + root, -g / 2 - root)
    total = 0
    for u, v in (poles, poles[::-1]):
        f = lambda s: g**n * s**n * (s + g) * mp.exp(s * tau) / (s - v) ** (n + 1)  # noqa: E731
        total += mp.diff(f, u, n) / mp.factorial(n)
    return complex(total)


def test_alpha_branch_and_roots():
    a = SP.alpha
    assert a.imag > 0
    s_plus, s_minus = SP.roots
    for s in (s_plus, s_minus):
        assert abs(s * s + SP.gamma_0 * s + SP.omega_0**2) < 1e-14


def test_params_validation():
    for bad in ((-0.1, 1.0, 1.0), (0.1, 0.0, 1.0), (0.1, 1.0, 0.0), (2.5, 1.0, 1.0)):
        with pytest.raises(ValueError):
            ResidueSeriesParams(*bad)


def test_from_params(low_z_node):
    sp = ResidueSeriesParams.from_params(low_z_node)
    assert sp.gamma_0 * sp.delay_t == pytest.approx(0.2 * math.pi, rel=1e-12)


@pytest.mark.parametrize("history", ["held", "switched"])
def test_starts_at_one(history):
    p, dp = residue_series_state(SP, [0.0], history)
    assert p[0] == pytest.approx(1.0, abs=1e-14)
    assert dp[0] == pytest.approx(0.0, abs=1e-14)


def test_no_coupling_is_cosine():
    sp = ResidueSeriesParams(0.0, 1.3, 2.0)
    t = np.linspace(0, 40, 401)
    assert np.max(np.abs(residue_series_pj(sp, t) - np.cos(1.3 * t))) < 1e-15


def test_weak_coupling_tends_to_cosine():
    sp = ResidueSeriesParams(1e-9, 1.0, 10 * math.pi)
    t = np.linspace(0, 60, 61)
    assert np.max(np.abs(residue_series_pj(sp, t) - np.cos(t))) < 1e-7


def test_first_interval_closed_form():
    t = np.linspace(0, SP.delay_t * 0.999, 500)
    for history in ("held", "switched"):
        assert np.max(np.abs(residue_series_pj(SP, t, history) - first_interval_pj(SP, t))) < 1e-13


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_terms_match_direct_residues(n):
    t = (n + 0.37) * SP.delay_t
    terms = series_contributions(SP, t)
    assert len(terms) == n + 1
    assert terms[n] == pytest.approx(residue_oracle(SP, n, t).real, rel=1e-9, abs=1e-14)


@pytest.mark.parametrize("history", ["held", "switched"])
def test_matches_numerical_inverse_laplace(history):
    # de Hoog inversion is trustworthy while only a couple of echoes matter
    image = laplace_image(SP, history)
    for t in (3.0, 0.5 * SP.delay_t, 1.3 * SP.delay_t, 1.9 * SP.delay_t):
        with mp.workdps(60):
            ref = float(mp.invertlaplace(image, t, method="dehoog"))
        assert residue_series_pj(SP, [t], history)[0] == pytest.approx(ref, abs=1e-9)


def test_contributions_sum_to_series():
    t = 4.6 * SP.delay_t
    for history in ("held", "switched"):
        terms = series_contributions(SP, t, history)
        assert math.fsum(terms) == pytest.approx(residue_series_pj(SP, [t], history)[0], abs=1e-12)


@settings(max_examples=25)
@given(g=st.floats(1e-3, 0.1), order=st.integers(1, 10), frac=st.floats(0, 12))
def test_terms_are_finite(g, order, frac):
    sp = ResidueSeriesParams(g, 1.0, 2 * math.pi * order)
    assert np.all(np.isfinite(series_contributions(sp, frac * sp.delay_t, "held")))


def test_order_cap():
    with pytest.raises(SeriesBreakdownError):
        residue_series_pj(SP, [(MAX_ORDER + 1.5) * SP.delay_t])


def test_rejects_negative_time_and_bad_history():
    with pytest.raises(ValueError):
        residue_series_pj(SP, [-1.0])
    with pytest.raises(ValueError):
        residue_series_pj(SP, [1.0], history="frozen")


@pytest.mark.parametrize("history", ["held", "switched"])
def test_series_matches_delay_solver(history):
    p = node_params(0.2 * math.pi)
    tr = simulate(p, "approx_mirror", 6 * p.delay_t, substeps=256 * 5, history=history)
    sp = ResidueSeriesParams.from_params(p)
    series = residue_series_pj(sp, tr.times, history)
    assert np.max(np.abs(tr["p_j"] / tr["p_j"][0] - series)) < 1e-6


@settings(max_examples=6)
@given(g=st.floats(1e-3, 0.1), order=st.integers(1, 10))
def test_series_matches_delay_solver_property(g, order):
    big_t = 2 * math.pi * order
    p = node_params(g * big_t, order=order)
    tr = simulate(p, "approx_mirror", 3 * big_t, substeps=256 * order)
    sp = ResidueSeriesParams.from_params(p)
    assert np.max(np.abs(tr["p_j"] / tr["p_j"][0] - residue_series_pj(sp, tr.times, "held"))) < 1e-5


def test_steady_state_envelope(low_z_node):
    p = low_z_node
    sp = ResidueSeriesParams.from_params(p)
    t = 200 / sp.gamma_0
    x, dx = residue_series_state(sp, [t], "held")
    envelope = math.hypot(x[0], dx[0] / sp.omega_0)
    pj, p0 = steady_state_amplitudes(p)
    assert envelope == pytest.approx(pj, rel=5e-3)
    assert p0 == pytest.approx(-p.cap_ratio * pj)


@given(g=st.floats(1e-3, 0.5), order=st.integers(1, 20))
def test_steady_state_energy_is_dark_ratio(g, order):
    p = node_params(g * 2 * math.pi * order, order=order)
    pj, _ = steady_state_amplitudes(p)
    assert pj**2 == pytest.approx(dark_state_energy_ratio(derive(p).gamma_0, p.delay_t), rel=1e-12)


def test_steady_state_needs_node():
    with pytest.raises(ValueError):
        steady_state_amplitudes(ratio_params(0.2, LOW_Z, roundtrips=5.5))


def test_open_closed_form_follows_simulation():
    g = 1e-3
    p = ratio_params(0.5, LOW_Z)
    tr = simulate(p, "open_approx", 2000.0, gamma=g)
    closed = open_tl_energy_closed_form(g, 1.0, tr.times)
    assert np.max(np.abs(tr["e_norm"] - closed)) < 2e-3
    assert np.all(np.diff(closed[:: 64 * 4]) < 0)


def test_open_closed_form_values():
    assert open_tl_energy_closed_form(0.1, 1.0, 0.0) == pytest.approx(1 + 0.01 / 4)
    t = math.pi / 4
    assert open_tl_energy_closed_form(0.1, 1.0, t) == pytest.approx(math.exp(-0.1 * t) * (1 + 0.05 + 0.0025 * 0.5))


def test_open_closed_form_regime_checks():
    with pytest.warns(UserWarning):
        open_tl_energy_closed_form(0.3, 1.0, 1.0)
    with pytest.raises(ValueError):
        open_tl_energy_closed_form(0.5, 1.0, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        open_tl_energy_closed_form(0.2, 1.0, 1.0)


def test_spectrum_node_zero_and_envelope():
    g, lv = 0.05, 5 * math.pi
    mirror, open_line = coupling_spectrum(g, 1.0, lv, [1.0])
    assert abs(mirror[0]) < 1e-30
    omega = np.linspace(0.01, 3, 3001)
    mirror, open_line = coupling_spectrum(g, 1.0, lv, omega)
    assert np.all(mirror <= 2 * open_line * (1 + 1e-15))
    peaks = (2 * np.arange(1, 10) + 1) * math.pi / (2 * lv)
    m_peak, o_peak = coupling_spectrum(g, 1.0, lv, peaks)
    assert np.allclose(m_peak, 2 * o_peak, rtol=1e-12)


@given(w=st.floats(0.01, 10), lv=st.floats(0.1, 100))
def test_spectrum_non_negative(w, lv):
    mirror, open_line = coupling_spectrum(0.05, 1.0, lv, [w])
    assert mirror[0] >= 0 and open_line[0] > 0


def test_spectrum_zeros():
    lv = 5 * math.pi
    k = np.arange(1, 8)
    mirror, _ = coupling_spectrum(0.05, 1.0, lv, k * math.pi / lv)
    assert np.all(np.abs(mirror) < 1e-30)


def test_spectrum_rejects_non_positive_frequency():
    with pytest.raises(ValueError):
        coupling_spectrum(0.05, 1.0, 1.0, [0.0, 1.0])


@given(r=st.floats(0.01, 0.9), z=st.floats(0.01, 10), lv=st.floats(0.5, 50))
def test_spectrum_circuit_form_matches(r, z, lv):
    p = ratio_params(r, z)
    d = derive(p)
    omega = np.array([0.3, 0.9, 1.0, 1.7])
    mirror, _ = coupling_spectrum(d.gamma_0, d.omega_0, lv, omega)
    assert np.allclose(coupling_from_circuit(p, lv, omega), mirror, rtol=1e-12, atol=1e-300)
