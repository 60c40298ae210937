import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irs_isac import Scenario, crb_phase1_closed, crb_whole, decide_strategy, element_allocation, simulate_phase2
from irs_isac import split_gain, split_reflection, steering
from irs_isac.array import beam_kernel, cancellation_project
from irs_isac.channel import assemble_channels, channel_gain_snr, path_gains
from irs_isac.scanning import dft_codebook, nearest_beam, snr_for_rate
from irs_isac.scenario import wrap_direction
from irs_isac.strategy import (
    BEAM_SPLIT,
    COMM_ONLY,
    SINGLE_BEAM,
    InsufficientMargin,
    element_allocation_genie,
    worst_case_snr,
)


def brute_split_gain(m, m_e, delta):
    total = (m - m_e) + sum(complex(math.cos(math.pi * delta * k), math.sin(math.pi * delta * k)) for k in range(m_e))
    return abs(total)


def test_split_reflection_limits():
    assert np.array_equal(split_reflection(0, 0.3, -0.5, 64).phi_e, steering(64, 0.3))
    full = split_reflection(64, 0.3, -0.5, 64).phi_e
    assert abs(np.vdot(steering(64, -0.5), full)) == pytest.approx(64.0, abs=1e-9)
    assert np.allclose(np.abs(split_reflection(17, 0.3, -0.5, 64).phi_e), 1.0)
    with pytest.raises(ValueError):
        split_reflection(65, 0.0, 0.0, 64)


def test_split_gain_matches_inner_product(defaults):
    t_iu, t_hat = defaults.theta_iu_bar, wrap_direction(defaults.theta_it_bar)
    phi = split_reflection(36, t_iu, t_hat, 64).phi_e
    g = abs(np.vdot(steering(64, t_iu), phi))
    assert g == pytest.approx(split_gain(64, 36, abs(t_hat - t_iu)), abs=1e-9)
    assert g == pytest.approx(brute_split_gain(64, 36, t_hat - t_iu), abs=1e-9)


@given(st.integers(1, 80).flatmap(lambda m: st.tuples(st.just(m), st.integers(0, m))), st.floats(0, 2))
def test_split_gain_bounds(mm, delta):
    m, m_e = mm
    g = split_gain(m, m_e, delta)
    assert -1e-9 <= g <= m + 1e-9
    assert abs(g - (m - m_e)) <= beam_kernel(m_e, delta) + 1e-9
    assert g == pytest.approx(brute_split_gain(m, m_e, delta), abs=1e-7 * m)


def test_split_gain_aligned():
    assert split_gain(64, 20, 0.0) == pytest.approx(64.0)


def test_swapping_groups_preserves_gains(rng):
    for _ in range(10):
        m, m_e = 48, int(rng.integers(1, 47))
        tu, tt = rng.uniform(-1, 1, 2)
        phi = split_reflection(m_e, tu, tt, m).phi_e
        swapped = np.conj(phi[::-1])  # sensing group now at the end
        assert np.allclose(swapped[: m - m_e] / steering(m, tu)[: m - m_e], 1.0)
        for t in (tu, tt):
            assert abs(np.vdot(steering(m, t), swapped)) == pytest.approx(abs(np.vdot(steering(m, t), phi)), abs=1e-9)


def test_worst_case_snr_matches_kernel():
    for m_e in (0, 10, 36, 63):
        oracle = 1000.0 / 64 ** 2 * beam_kernel(64 - m_e, 1 / 64) ** 2
        assert worst_case_snr(1000.0, m_e, 64, 64) == pytest.approx(oracle, rel=1e-12)


def test_allocation_examples():
    assert element_allocation(40.0, 40.0, 64, 64) == 0
    # the linearised form only agrees to one element when L >> M
    exact = element_allocation(400.0, 100.0, 64, 1024)
    approx = element_allocation(400.0, 100.0, 64, 1024, exact=False)
    assert abs(exact - approx) <= 1
    # with L = M the arcsine is far from linear
    oracle = math.floor(64 - 128 / math.pi * math.asin(64 * 0.5 * math.sin(math.pi / 128)))
    assert element_allocation(400.0, 100.0, 64, 64) == oracle == 27
    assert element_allocation(400.0, 100.0, 64, 64, exact=False) == 32
    with pytest.raises(InsufficientMargin):
        element_allocation(10.0, 40.0, 64, 64)


def test_allocation_monotone_in_target():
    gl = 2000.0
    prev = 64
    for g in np.linspace(1.0, gl, 400):
        m_e = element_allocation(gl, g, 64, 64)
        assert 0 <= m_e < 64
        assert m_e <= prev
        prev = m_e


@settings(max_examples=200)
@given(st.floats(1.0, 1e5), st.floats(1e-4, 1.0))
def test_allocation_guarantee(gamma_ell, frac):
    gamma = gamma_ell * frac
    m_e = element_allocation(gamma_ell, gamma, 64, 64)
    if m_e > 0:
        assert worst_case_snr(gamma_ell, m_e, 64, 64) >= gamma * (1 - 1e-12)


def test_genie_allocation_not_below_worst_case():
    for du in (0.0, 0.005, 1 / 64):
        gl = 1500.0 * (beam_kernel(64, du) / 64) ** 2
        gamma = 40.0
        assert element_allocation_genie(gl, gamma, 64, du) >= element_allocation(gl, gamma, 64, 64)


def _setup(s):
    cb = dft_codebook(s.m_re, s.codebook_size)
    eta = float(cb.directions[nearest_beam(cb, s.theta_iu_bar)])
    return eta


def test_decision_single_beam(defaults):
    eta = _setup(defaults)
    theta_hat = defaults.theta_bi + eta + 0.5 / 64
    d = decide_strategy(theta_hat, eta, 1500.0, defaults)
    assert d.kind == SINGLE_BEAM and d.m_e == 0
    assert np.array_equal(d.reflection, steering(64, eta))


def test_decision_split(defaults):
    eta = _setup(defaults)
    gamma = snr_for_rate(defaults, 5.0)
    d = decide_strategy(defaults.theta_it, eta, 1500.0, defaults)
    assert d.kind == BEAM_SPLIT
    assert d.m_e == element_allocation(1500.0, gamma, 64, 64)
    assert d.delta_ut > 11 / 64


def test_decision_no_margin(defaults):
    eta = _setup(defaults)
    gamma = snr_for_rate(defaults, 5.0)
    d = decide_strategy(defaults.theta_it, eta, gamma, defaults)
    assert d.kind == COMM_ONLY and d.m_e == 0


def test_decision_undetectable(defaults):
    eta = _setup(defaults)
    d = decide_strategy(defaults.theta_bi + 0.05, eta, 1500.0, defaults)
    assert d.kind == COMM_ONLY


def test_decision_genie_flag(defaults):
    eta = _setup(defaults)
    s = defaults.replace(worst_case_allocation=False)
    du = abs(wrap_direction(s.theta_iu_bar - eta))
    d = decide_strategy(s.theta_it, eta, 1500.0, s, delta_u=du)
    assert d.m_e == element_allocation_genie(1500.0, snr_for_rate(s, 5.0), 64, du)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1, 1), st.floats(0, 3000))
def test_decision_partition_and_crb(theta_hat, gamma_ell):
    s = Scenario()
    eta = _setup(s)
    d1 = decide_strategy(theta_hat, eta, gamma_ell, s)
    d2 = decide_strategy(theta_hat, eta, gamma_ell, s)
    assert d1.kind in (SINGLE_BEAM, BEAM_SPLIT, COMM_ONLY)
    assert d1.kind == d2.kind and d1.m_e == d2.m_e and np.array_equal(d1.reflection, d2.reflection)
    assert 0 <= d1.m_e < s.m_re
    if d1.kind == BEAM_SPLIT:
        assert d1.delta_ut > 11 / s.m_re and gamma_ell > snr_for_rate(s, 5.0)
    assert crb_whole(s, d1.reflection)[0] <= crb_phase1_closed(s)


def test_phase2_echo_energy_on_target(defaults):
    s = defaults.replace(zeta_iu=30.0)  # user and target on the same spatial line
    phi = steering(64, s.theta_it_bar)
    rec = simulate_phase2(s, None, phi, noise=False)
    g = path_gains(s)
    a = steering(12, s.theta_it)
    proj = np.linalg.norm(cancellation_project(a, s.theta_bi)) ** 2
    per_symbol = 64 * 1.0 * abs(g.alpha_g) ** 2 * abs(g.alpha_s) ** 2 * proj * 64 ** 2
    assert np.allclose(np.sum(np.abs(rec.y2) ** 2, axis=0), per_symbol, rtol=1e-9)
    assert proj <= 12
    assert proj == pytest.approx(12 - beam_kernel(12, s.theta_it - s.theta_bi) ** 2 / 12, rel=1e-12)


def test_phase2_comm_only_echo_bounded(defaults, rng):
    eta = _setup(defaults)
    d = decide_strategy(defaults.theta_it, eta, 30.0, defaults)
    assert d.kind == COMM_ONLY
    rec = simulate_phase2(defaults, None, d, rng, noise=False)
    g = path_gains(defaults)
    off = wrap_direction(defaults.theta_it_bar - eta)
    bound = 64 * abs(g.alpha_g) ** 2 * abs(g.alpha_s) ** 2 * 12 / math.sin(math.pi * abs(off) / 2) ** 2
    assert np.all(np.sum(np.abs(rec.y2) ** 2, axis=0) <= bound)


def test_phase2_block_structure_and_determinism(defaults):
    phi = steering(64, 0.2)
    a = simulate_phase2(defaults, None, phi, np.random.default_rng(4))
    b = simulate_phase2(defaults, None, phi, np.random.default_rng(4))
    assert np.array_equal(a.y2, b.y2) and np.array_equal(a.x2, b.x2)
    tau2 = defaults.data_symbols
    assert a.x2.shape == (64, tau2)
    assert np.allclose(a.x2 @ a.x2.conj().T, tau2 * np.outer(phi, phi.conj()))
    assert np.allclose(steering(12, defaults.theta_bi).conj() @ a.y2, 0.0, atol=1e-9 * np.abs(a.y2).max())


def test_phase2_requires_data_time():
    s = Scenario(scan_symbols=1000)  # constructed without validation
    with pytest.raises(ValueError):
        simulate_phase2(s, None, steering(64, 0.0), np.random.default_rng(0))


def test_phase2_rate_uses_reflection(defaults):
    ch = assemble_channels(defaults)
    eta = _setup(defaults)
    beam = simulate_phase2(defaults, ch, steering(64, eta), noise=False)
    split = simulate_phase2(defaults, ch, split_reflection(36, eta, 0.5, 64).phi_e, noise=False)
    assert split.user_rate < beam.user_rate


def test_split_user_group_alone_meets_target(rng):
    # the allocation certifies the user group's own gain; the sensing group's
    # sidelobe toward the user is not part of that certificate
    base = Scenario()
    gamma = snr_for_rate(base, 5.0)
    checked = 0
    for _ in range(300):
        s = base.replace(zeta_it=float(rng.uniform(-40, 70)), d_iu=float(rng.uniform(4, 45)))
        eta = _setup(s)
        du = abs(wrap_direction(s.theta_iu_bar - eta))
        gl = channel_gain_snr(s) * beam_kernel(64, du) ** 2
        d = decide_strategy(s.theta_it, eta, gl, s)
        if d.kind != BEAM_SPLIT:
            continue
        checked += 1
        assert channel_gain_snr(s) * beam_kernel(64 - d.m_e, du) ** 2 >= gamma
    assert checked > 50
