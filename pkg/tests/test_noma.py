import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import loop_sinr_good, loop_sinr_poor, manual_instance, random_instance
from risnoma.numerics import SingularMatrixError, make_rng
from risnoma.noma import (
    DownlinkModel,
    PowerAllocation,
    oma_sum_rate,
    sic_check,
    sinr_good,
    sinr_poor,
    sum_rate,
    zf_precode,
)
from risnoma.rlenv import PhaseConfig


def rel_err(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# -- precoding -------------------------------------------------------------


def test_zf_identity_and_scaled():
    assert np.allclose(zf_precode(np.eye(4)), np.eye(4))
    assert np.allclose(zf_precode(2 * np.eye(4)), 0.5 * np.eye(4))


@pytest.mark.parametrize("seed", range(20))
def test_zf_multiply_back(seed):
    h = random_instance(make_rng(seed)).h_au
    assert np.max(np.abs(h @ zf_precode(h) - np.eye(4))) < 1e-9


def test_zf_singular_propagates():
    with pytest.raises(SingularMatrixError):
        zf_precode(np.ones((3, 3)))


# -- power allocation ------------------------------------------------------


def test_power_allocation_fixed():
    alloc = PowerAllocation.fixed(4)
    assert np.all(alloc.good == 0.2) and np.all(alloc.poor == 0.8)
    assert alloc.favours_poor()
    assert alloc.total_power(0.025) == pytest.approx(0.1)


@pytest.mark.parametrize("alpha", [[[0.3, 0.8]], [[-0.1, 1.1]], [[0.5, 0.5, 0.0]]])
def test_power_allocation_rejects(alpha):
    with pytest.raises(ValueError):
        PowerAllocation(np.array(alpha))


# -- SINR hand cases ---------------------------------------------------------


def test_sinr_good_perfect_zf_example():
    inst = manual_instance(np.eye(2), np.ones((1, 2)), np.ones((2, 1)), noise=0.1)
    alloc = PowerAllocation(np.array([[0.5, 0.5], [0.5, 0.5]]))
    assert sinr_good(inst, np.eye(2), alloc, 1.0, 0) == pytest.approx(5.0)


def test_sinr_zero_fractions():
    inst = random_instance(make_rng(0))
    p = zf_precode(inst.h_au)
    q = PhaseConfig((1,) * 9, 4)
    all_poor = PowerAllocation(np.tile([0.0, 1.0], (4, 1)))
    all_good = PowerAllocation(np.tile([1.0, 0.0], (4, 1)))
    assert sinr_good(inst, p, all_poor, 1.0, 2) == 0.0
    assert sinr_poor(inst, q, p, all_good, 1.0, 2) == 0.0


def test_sinr_poor_single_cluster_collapse():
    rng = make_rng(3)
    inst = random_instance(rng, k=1, n_res=3, noise=0.05)
    p = zf_precode(inst.h_au)
    q = PhaseConfig((1, 2, 3), 4)
    rho = 2.0
    cascade = (inst.h_ru[0] * q.reflection()) @ inst.h_ar
    s = rho * abs(cascade @ p[:, 0]) ** 2
    expected = s * 0.8 / (s * 0.2 + 0.05)
    got = sinr_poor(inst, q, p, PowerAllocation.fixed(1), rho, 0)
    assert got == pytest.approx(expected, rel=1e-12)


# -- loop oracle -------------------------------------------------------------


@pytest.mark.parametrize("seed", range(25))
def test_sinrs_match_loop_oracle(seed):
    rng = make_rng(seed)
    inst = random_instance(rng, pairing=rng.permutation(4))
    p = zf_precode(inst.h_au)
    q = PhaseConfig(tuple(rng.integers(1, 4, 9)), 4)
    alloc = PowerAllocation(np.column_stack([a := rng.uniform(0, 0.5, 4), 1 - a]))
    rho = rng.uniform(0.1, 10.0)
    report = sum_rate(inst, q, p, alloc, rho)
    model_poor = DownlinkModel(inst, alloc, rho, precoder=p).poor_rates(q.reflection())[0]
    for k in range(4):
        ref_g = loop_sinr_good(inst, p, alloc.good, rho, k)
        ref_p = loop_sinr_poor(inst, q.reflection(), p, alloc.good, alloc.poor, rho, k)
        assert rel_err(sinr_good(inst, p, alloc, rho, k), ref_g) < 1e-12
        assert rel_err(report.sinr_good[k], ref_g) < 1e-12
        assert rel_err(sinr_poor(inst, q, p, alloc, rho, k), ref_p) < 1e-12
        assert rel_err(report.sinr_poor[k], ref_p) < 1e-12
        assert rel_err(model_poor[k], np.log2(1 + ref_p)) < 1e-12


def test_sum_rate_recomposition():
    rng = make_rng(8)
    inst = random_instance(rng)
    p = zf_precode(inst.h_au)
    q = PhaseConfig(tuple(rng.integers(1, 4, 9)), 4)
    alloc = PowerAllocation.fixed(4)
    report = sum_rate(inst, q, p, alloc, 1.0)
    total = sum(np.log2(1 + sinr_good(inst, p, alloc, 1.0, k)) for k in range(4))
    total += sum(np.log2(1 + sinr_poor(inst, q, p, alloc, 1.0, k)) for k in range(4))
    assert report.sum_rate == pytest.approx(total, rel=1e-12)
    assert DownlinkModel(inst, alloc, 1.0).rate(q) == pytest.approx(total, rel=1e-12)


def test_sum_rate_unit_and_zero_sinr():
    # unit-gain diagonal system: good SINR = a_g / noise, tuned to 1
    inst = manual_instance(np.eye(4), np.eye(4), np.eye(4), noise=0.2)
    q = np.ones(4)
    report = sum_rate(inst, q, np.eye(4), PowerAllocation.fixed(4), 1.0)
    assert np.allclose(report.sinr_good, 1.0)
    assert np.allclose(report.rate_good, 1.0)
    zero = manual_instance(np.eye(4), np.zeros((4, 4)), np.zeros((4, 4)), noise=0.2)
    rep0 = sum_rate(zero, q, np.eye(4), PowerAllocation.fixed(4), 0.0)
    assert rep0.sum_rate == 0.0


# -- SIC ---------------------------------------------------------------------


def test_sic_check_direct():
    assert sic_check([1.0, 0.5, 0.0], [0.5, 1.0, 0.0]).tolist() == [True, False, True]


def test_sic_feasible_when_good_user_is_stronger():
    # good-user gain 1, poor-user cascade gain 0.25, no leakage either side
    inst = manual_instance(np.eye(2), np.eye(2), 0.5 * np.eye(2), noise=0.1)
    report = sum_rate(inst, np.ones(2), np.eye(2), PowerAllocation.fixed(2), 1.0)
    assert report.sic_feasible.all()


@pytest.mark.parametrize("seed", range(10))
def test_sic_flag_matches_reevaluation(seed):
    rng = make_rng(seed)
    inst = random_instance(rng)
    p = zf_precode(inst.h_au)
    q = PhaseConfig(tuple(rng.integers(1, 4, 9)), 4)
    alloc = PowerAllocation.fixed(4)
    report = sum_rate(inst, q, p, alloc, 1.0)
    g = np.abs(inst.h_au @ p) ** 2
    for k in range(4):
        leak = sum(g[k, i] for i in range(4) if i != k)
        at_good = np.log2(1 + g[k, k] * 0.8 / (g[k, k] * 0.2 + leak + inst.noise_var_good[k]))
        assert report.sic_feasible[k] == (at_good >= report.rate_poor[k])


# -- OMA ---------------------------------------------------------------------


def test_oma_snr_three_gives_rate_one():
    inst = manual_instance(np.eye(2), np.eye(2), np.eye(2), noise=1.0)
    report = oma_sum_rate(inst, np.ones(2), np.eye(2), 3.0)
    assert np.allclose(report.rates, 1.0)


def test_oma_zero_channel():
    inst = manual_instance(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), noise=1.0)
    assert oma_sum_rate(inst, np.ones(2), np.eye(2), 0.0).sum_rate == 0.0


def test_noma_beats_oma_on_asymmetric_clusters():
    wins = 0
    for seed in range(20):
        rng = make_rng(seed)
        inst = random_instance(rng, noise=1e-4)
        inst = type(inst)(**{**inst.__dict__, "h_ru": 0.05 * inst.h_ru})
        q = PhaseConfig(tuple(rng.integers(1, 4, 9)), 4)
        noma = DownlinkModel(inst, rho=1.0).rate(q)
        oma = DownlinkModel(inst, rho=1.0, scheme="oma").rate(q)
        wins += noma >= oma
    assert wins == 20


def test_model_oma_matches_function():
    rng = make_rng(4)
    inst = random_instance(rng)
    q = PhaseConfig(tuple(rng.integers(1, 4, 9)), 4)
    model = DownlinkModel(inst, rho=0.7, scheme="oma")
    assert model.rate(q) == pytest.approx(model.report(q).sum_rate, rel=1e-12)


# -- invariants --------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.01, 10.0), st.floats(1.01, 10.0))
def test_sum_rate_monotone_in_power(seed, rho, factor):
    rng = make_rng(seed)
    inst = random_instance(rng)
    q = PhaseConfig(tuple(rng.integers(1, 4, 9)), 4)
    low = DownlinkModel(inst, rho=rho).rate(q)
    high = DownlinkModel(inst, rho=rho * factor).rate(q)
    assert high >= low - 1e-12 * abs(low)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.0, 2 * np.pi))
def test_common_phase_rotation_invariance(seed, phi):
    rng = make_rng(seed)
    inst = random_instance(rng)
    q = PhaseConfig(tuple(rng.integers(1, 4, 9)), 4)
    alloc = PowerAllocation.fixed(4)
    base = sum_rate(inst, q, zf_precode(inst.h_au), alloc, 1.0)
    rotated = inst.scaled(np.exp(1j * phi))
    rot = sum_rate(rotated, q, zf_precode(rotated.h_au), alloc, 1.0)
    assert np.allclose(rot.sinr_good, base.sinr_good, rtol=1e-9)
    assert np.allclose(rot.sinr_poor, base.sinr_poor, rtol=1e-9)


def test_huge_noise_drives_sinr_to_zero():
    inst = random_instance(make_rng(2), noise=1e30)
    report = sum_rate(inst, np.ones(9), zf_precode(inst.h_au), PowerAllocation.fixed(4), 1.0)
    assert np.all(report.sinr_good < 1e-25) and np.all(report.sinr_poor < 1e-25)
