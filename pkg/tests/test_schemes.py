import json
import os

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from mcnoma.channel import LinkBudget, MimoNetworkChannel, Topology, TwoCellScalarChannels, rayleigh, sample_network
from mcnoma.schemes import (
    SCHEMES,
    SchemeResult,
    SupportBound,
    noma_cb_rates,
    noma_cs_schedule,
    noma_dcs_rates,
    noma_jt_rates,
    noma_pair_rates,
    noma_tdm_rates,
    oma_ffr_rates,
    single_cell_noma_rates,
    single_cell_oma_rates,
    single_cell_sinr,
    supported_users,
)
from mcnoma.beamforming import coordinated_beamformer, effective_gains
from mcnoma.schemes import _zf_beams
from mcnoma.single_cell import TwoUserGains, bc_noma_point

import oracles
from oracles import C

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "schemes_seed42.json")
gain = st.floats(0, 100)
power = st.floats(0, 10)


def _scalar(g11=4, g12=1, g21=1, g22=4, ge1=0.5, ge2=0.5, P=1.0, Pc=1.0):
    return TwoCellScalarChannels(g11, g12, g21, g22, ge1, ge2, P, Pc)


def _random_mimo(seed, n=2, K=3, batch=(), scale=3.0):
    return MimoNetworkChannel(scale * rayleigh(np.random.default_rng(seed), batch + (2, 2, n, 2, K, K)))


# ------------------------------------------------------------------ JT

def test_jt_worked_example():
    r = noma_jt_rates(_scalar()).rates
    np.testing.assert_allclose(r, [C(2), C(2), C(0.5)], atol=1e-12)
    np.testing.assert_allclose(r, [0.79248, 0.79248, 0.29248], atol=5e-6)
    terms = noma_jt_rates(_scalar()).info["edge_terms"]
    np.testing.assert_allclose(terms, [C(5 / 6), C(5 / 6), C(0.5)], atol=1e-12)


def test_jt_degenerate_cases():
    r = noma_jt_rates(_scalar(Pc=0.0)).rates
    assert r[2] == 0.0 and r[0] == pytest.approx(C(4 / 2))
    r = noma_jt_rates(_scalar(g12=0, g21=0)).rates
    assert r[:2] == pytest.approx([C(4), C(4)])


@given(gain, gain, gain, gain, gain, gain, power, power, power)
def test_jt_edge_rate_monotone(g11, g12, g21, g22, ge1, ge2, P, pc1, pc2):
    lo, hi = sorted((pc1, pc2))
    a = noma_jt_rates(_scalar(g11, g12, g21, g22, ge1, ge2, P, lo))
    b = noma_jt_rates(_scalar(g11, g12, g21, g22, ge1, ge2, P, hi))
    assert a.rates[2] <= b.rates[2] + 1e-15
    # more center power means more interference on the edge message
    c = noma_jt_rates(_scalar(g11, g12, g21, g22, ge1, ge2, P + 1.0, hi))
    assert c.rates[2] <= b.rates[2] + 1e-15
    terms = b.info["edge_terms"]
    assert terms.shape == (3,)
    assert np.all(b.rates[2] <= terms) and b.rates[2] == terms.min()


def test_jt_is_vectorised():
    ch = _scalar(g11=np.array([4.0, 1.0]), ge1=np.array([0.5, 2.0]))
    r = noma_jt_rates(ch).rates
    assert r.shape == (2, 3)
    np.testing.assert_allclose(r[0], noma_jt_rates(_scalar()).rates)


# ----------------------------------------------------------------- DCS

def test_dcs_selects_stronger_bs():
    assert noma_dcs_rates(_scalar(ge1=1, ge2=2)).info["serving_bs"] == 2
    assert noma_dcs_rates(_scalar(ge1=2, ge2=1)).info["serving_bs"] == 1
    assert noma_dcs_rates(_scalar(ge1=1, ge2=1)).info["serving_bs"] == 1


def test_dcs_worked_example():
    res = noma_dcs_rates(_scalar(ge1=0.5, ge2=1.0))
    r1, _, rc = res.rates
    assert res.info["serving_bs"] == 2
    assert r1 == pytest.approx(C(4 / 3), abs=1e-12)
    assert r1 == pytest.approx(0.61120, abs=5e-6)
    assert rc == pytest.approx(min(C(2 / 3), C(0.4)), abs=1e-12)
    assert rc == pytest.approx(0.2427134, abs=1e-7)
    # the rounded figure quoted with the example is off in the fifth decimal
    assert rc == pytest.approx(0.24275, abs=1e-4)


def test_dcs_without_edge_power():
    r = noma_dcs_rates(_scalar(ge1=0.5, ge2=1.0, Pc=0.0)).rates
    assert r[2] == 0.0 and r[0] == pytest.approx(C(4 / 2))


@given(gain, gain, gain, gain, gain, gain, power, power)
def test_dcs_relabeling_equivariance(g11, g12, g21, g22, ge1, ge2, P, Pc):
    assume(ge1 != ge2)
    ch = _scalar(g11, g12, g21, g22, ge1, ge2, P, Pc)
    a, b = noma_dcs_rates(ch), noma_dcs_rates(ch.swapped())
    assert a.info["serving_bs"] + b.info["serving_bs"] == 3
    np.testing.assert_allclose(b.rates, a.rates[[1, 0, 2]], rtol=1e-12, atol=1e-15)


# -------------------------------------------------------- single-cell

def _zf_oracle(H, ici=True):
    """SINR of every user under identity precoding and projection-based receive ZF."""
    n, K = H.shape[2], H.shape[-1]
    out = np.zeros((2, n, 2))
    for c in range(2):
        for k in range(n):
            for r in range(2):
                A = H[c, c, k, r][:, :n]
                d = A[:, k]
                others = np.delete(A, k, axis=1)
                if others.shape[1]:
                    P = np.eye(K) - others @ np.linalg.pinv(others)
                else:
                    P = np.eye(K)
                v = P @ d
                v = v / np.linalg.norm(v)
                s = abs(np.vdot(v, d)) ** 2
                i = np.sum(np.abs(v.conj() @ H[1 - c, c, k, r][:, :n]) ** 2) if ici else 0.0
                out[c, k, r] = s / (1 + i)
    return out


@pytest.mark.parametrize("n, K", [(1, 1), (2, 2), (2, 4), (4, 4)])
def test_single_cell_sinr_matches_projection_oracle(n, K):
    ch = _random_mimo(n * 10 + K, n, K)
    for ici in (True, False):
        np.testing.assert_allclose(single_cell_sinr(ch, ici), _zf_oracle(ch.H, ici), rtol=1e-8)


def test_oma_without_cross_channels_is_halved_single_user_rate():
    ch = _random_mimo(1, 2, 2).without_ici()
    want = 0.5 * np.vectorize(C)(_zf_oracle(ch.H, ici=False)).reshape(-1)
    np.testing.assert_allclose(single_cell_oma_rates(ch).rates, want, rtol=1e-9)


@pytest.mark.parametrize("fn", [single_cell_oma_rates, single_cell_noma_rates, noma_tdm_rates, oma_ffr_rates,
                                noma_cs_schedule])
def test_scaling_increases_every_rate(fn):
    ch = _random_mimo(2, 2, 3)
    lo, hi = fn(ch).rates, fn(ch.scaled(2.0)).rates
    assert np.all(hi >= lo - 1e-12)
    assert hi.sum() > lo.sum()


@pytest.mark.parametrize("name, fn", [("OMA", single_cell_oma_rates), ("NOMA", single_cell_noma_rates),
                                      ("NOMA-TDM", noma_tdm_rates), ("OMA-FFR", oma_ffr_rates)])
def test_golden_seed42(name, fn):
    with open(GOLDEN) as fh:
        golden = json.load(fh)
    s = sample_network(42, Topology(), LinkBudget(), 4, 0)
    np.testing.assert_allclose(fn(s.mimo).rates, golden[name], rtol=1e-9)


def test_tdm_is_half_of_interference_free_noma():
    ch = _random_mimo(4, 3, 4)
    tdm = noma_tdm_rates(ch)
    np.testing.assert_array_equal(tdm.rates, 0.5 * single_cell_noma_rates(ch.without_ici()).rates)
    assert tdm.normalization == 0.5


def test_tdm_symmetric_cells():
    H = _random_mimo(5, 2, 2).H.copy()
    H[1, 1], H[0, 1] = H[0, 0], H[1, 0]
    r = noma_tdm_rates(MimoNetworkChannel(H)).rates.reshape(2, -1)
    np.testing.assert_array_equal(r[0], r[1])


def test_ffr_band_extremes():
    ch = _random_mimo(6, 2, 3)
    full = oma_ffr_rates(ch, 1.0)
    assert np.all(full.edge_rates() == 0)
    np.testing.assert_allclose(full.center_rates(), C_vec(single_cell_sinr(ch)[..., 0]).reshape(-1))
    tiny = oma_ffr_rates(ch, 1e-9)
    assert np.all(tiny.center_rates() < 1e-8)
    with pytest.raises(ValueError):
        oma_ffr_rates(ch, 0.0)


def C_vec(x):
    return 0.5 * np.log2(1 + x)


@given(st.floats(0.01, 1), st.floats(0.01, 0.99))
@settings(max_examples=30)
def test_ffr_rates_linear_in_band_fractions(d1, d2):
    ch = _random_mimo(7, 2, 3)
    a, b = oma_ffr_rates(ch, d1), oma_ffr_rates(ch, d2)
    np.testing.assert_allclose(a.center_rates() / d1, b.center_rates() / d2, rtol=1e-10)
    if d1 < 1:
        np.testing.assert_allclose(a.edge_rates() / (1 - d1), b.edge_rates() / (1 - d2), rtol=1e-10)


@given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 1))
def test_pair_rates_match_broadcast_point(x, y, share):
    gc, ge = max(x, y), min(x, y)
    rc, re = noma_pair_rates(gc, ge, share)
    p = bc_noma_point(TwoUserGains(gc, ge), share)
    assert float(rc) == pytest.approx(p.r1, rel=1e-12, abs=1e-15)
    assert float(re) == pytest.approx(p.r2, rel=1e-12, abs=1e-15)


def test_pair_rates_edge_limited_by_weaker_decoder():
    # the center user is the weaker one: the edge message must still decode there
    rc, re = noma_pair_rates(1.0, 10.0, 0.2)
    assert re == pytest.approx(C(0.8 / 1.2))


# ---------------------------------------------------------------- CB

def test_cb_scaling_with_fixed_beams():
    ch = _random_mimo(2, 2, 3)
    bf = coordinated_beamformer(ch, max_iter=20)
    g, g2 = effective_gains(ch, bf.w, bf.v), effective_gains(ch.scaled(2.0), bf.w, bf.v)
    np.testing.assert_allclose(g2, 4 * g, rtol=1e-12)
    lo, hi = noma_cb_rates(ch, beams=bf).rates, noma_cb_rates(ch.scaled(2.0), beams=bf).rates
    assert np.all(hi >= lo) and hi.sum() > lo.sum()


def test_cb_with_zero_leakage_reduces_to_broadcast_points():
    rng = np.random.default_rng(8)
    checked = 0
    for _ in range(120):
        ch = MimoNetworkChannel(rayleigh(rng, (2, 2, 1, 2, 2, 2)) * 4)
        bf = coordinated_beamformer(ch)
        assert bf.leakage < 1e-12
        res = noma_cb_rates(ch, beams=bf)
        g = effective_gains(ch, bf.w, bf.v)
        for c in range(2):
            # edge users see no other-cell beam; center users still hear it as noise
            gc = g[c, 0, 0, c, 0] / (1 + g[c, 0, 0, 1 - c, 0])
            ge = g[c, 0, 1, c, 0] / (1 + g[c, 0, 1, 1 - c, 0])
            assert g[c, 0, 1, 1 - c, 0] < 1e-12
            if gc >= ge:
                p = bc_noma_point(TwoUserGains(gc, ge), 0.2)
                np.testing.assert_allclose(res.rates[2 * c:2 * c + 2], p[:2], rtol=1e-12)
                checked += 1
    assert checked >= 10


def test_cb_reports_beam_quality():
    res = noma_cb_rates(_random_mimo(9, 4, 4, (3,)), max_iter=5)
    assert res.info["leakage"].shape == (3,)
    assert res.info["converged"].dtype == bool
    assert res.rates.shape == (3, 16)


# ---------------------------------------------------------------- CS

def _nested(g):
    return g.tolist()


def _all_actions(n):
    for bits in range(4 ** n):
        yield [[bool(bits >> (2 * j + b) & 1) for j in range(n)] for b in range(2)]


def test_cs_single_cluster_equals_brute_force():
    for seed in range(30):
        ch = _random_mimo(100 + seed, 1, 2, scale=2.0)
        w, v = _zf_beams(ch)
        g = _nested(effective_gains(ch, w, v))
        for qos in (0.0, 0.3):
            best = max(_all_actions(1), key=lambda a: oracles.cs_objective_loop(
                oracles.cs_rates_loop(g, a), a, qos))
            res = noma_cs_schedule(ch, qos)
            assert res.info["action"].tolist() == best
            want = oracles.cs_rates_loop(g, best)
            np.testing.assert_allclose(res.rates, [want[u] for u in res.user_ids], rtol=1e-10)


@pytest.mark.parametrize("n", [2, 3])
def test_cs_no_single_cluster_change_helps(n):
    for seed in range(10):
        ch = _random_mimo(200 + seed, n, 4, scale=2.0)
        w, v = _zf_beams(ch)
        g = _nested(effective_gains(ch, w, v))
        qos = 0.2
        res = noma_cs_schedule(ch, qos)
        act = res.info["action"].tolist()
        feas, total = oracles.cs_objective_loop(oracles.cs_rates_loop(g, act), act, qos)
        for k in range(n):
            for a1 in (True, False):
                for a2 in (True, False):
                    alt = [row[:] for row in act]
                    alt[0][k], alt[1][k] = a1, a2
                    f, t = oracles.cs_objective_loop(oracles.cs_rates_loop(g, alt), alt, qos)
                    assert (f, t) <= (feas, total + 1e-9)


def test_cs_picks_center_only_for_the_aggressor():
    # one antenna, one cluster; BS 1 (index 0) floods the edge user of cell 2
    H = np.zeros((2, 2, 1, 2, 1, 1), dtype=complex)
    amp = lambda x: np.sqrt(x)  # noqa: E731
    H[0, 0, 0, 0] = amp(100)  # BS1 -> center 1
    H[0, 0, 0, 1] = amp(1.2)  # BS1 -> edge 1, just above the target on its own
    H[1, 1, 0, 0] = amp(100)
    H[1, 1, 0, 1] = amp(60)  # BS2 -> edge 2
    H[0, 1, 0, 1] = amp(200)  # BS1 -> edge 2, strong interference
    H[1, 0, 0, 1] = amp(0.01)
    ch = MimoNetworkChannel(H)
    qos = 0.4
    res = noma_cs_schedule(ch, qos)
    assert res.info["action"].tolist() == [[False], [True]]
    assert not res.info["qos_infeasible"]
    assert res.edge_rates()[1] >= qos
    g = _nested(effective_gains(ch, *_zf_beams(ch)))
    # with BS 1 superposing, edge 2 would miss the target
    both = oracles.cs_rates_loop(g, [[True], [True]])
    assert both[(1, 0, 1)] < qos
    # and serving edge 1 instead of edge 2 is feasible but worse
    swap = oracles.cs_rates_loop(g, [[True], [False]])
    assert swap[(0, 0, 1)] >= qos
    assert sum(swap.values()) < res.rates.sum()


def test_cs_without_qos_is_sum_rate_argmax():
    ch = _random_mimo(300, 1, 2)
    g = _nested(effective_gains(ch, *_zf_beams(ch)))
    best = max(_all_actions(1), key=lambda a: sum(oracles.cs_rates_loop(g, a).values()))
    assert noma_cs_schedule(ch, 0.0).info["action"].tolist() == best


def test_cs_flags_infeasible_qos():
    res = noma_cs_schedule(_random_mimo(301, 2, 2, (4,)), qos_min_edge_rate=100.0)
    assert np.all(res.info["qos_infeasible"] | ~res.info["action"].any(axis=(-2, -1)))


# -------------------------------------------------------- user counts

def test_supported_users_table():
    assert supported_users("NOMA-CB", 4) == 12
    assert supported_users("NOMA-DCS", 4) == 12
    assert supported_users("NOMA-JT", 4) == 12
    assert supported_users("NOMA-JT", 4, jt_four_k=True) == 16
    assert supported_users("NOMA", 4) == 8
    assert supported_users("OMA", 4) == 4
    b = supported_users("NOMA-CS", 4)
    assert isinstance(b, SupportBound) and b.limit == 16
    assert str(b) == "<<16 (4K)"


def test_supported_users_edge_cases():
    with pytest.warns(UserWarning):
        assert supported_users("NOMA-CB", 1) == 0
    with pytest.raises(ValueError):
        supported_users("NOMA-XYZ", 4)
    with pytest.raises(ValueError):
        supported_users("OMA", 0)


# -------------------------------------------------------------- misc

def test_scheme_result_validation():
    with pytest.raises(ValueError):
        SchemeResult("x", np.zeros(3), ("a", "b"), np.array([False, True]))
    with pytest.raises(ValueError):
        SchemeResult("x", np.zeros(2), ("a", "b"), np.array([False, True]), normalization=0.0)
    r = SchemeResult("x", np.array([1.0, 2.0]), ("a", "b"), np.array([False, True]))
    assert r.per_user() == [("a", 1.0), ("b", 2.0)]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_every_scheme_finite_and_nonnegative(trial):
    s = sample_network(7, Topology(), LinkBudget(), 4, trial)
    results = [single_cell_oma_rates(s.mimo), single_cell_noma_rates(s.mimo), noma_tdm_rates(s.mimo),
               oma_ffr_rates(s.mimo), noma_cb_rates(s.mimo, max_iter=10), noma_cs_schedule(s.mimo, 0.25),
               noma_jt_rates(s.scalar), noma_dcs_rates(s.scalar)]
    assert {r.scheme for r in results} == set(SCHEMES)
    for r in results:
        assert np.all(np.isfinite(r.rates)) and np.all(r.rates >= 0)
