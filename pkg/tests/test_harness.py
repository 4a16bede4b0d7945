import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import mcnoma.harness as harness
from mcnoma.channel import LinkBudget, MimoNetworkChannel, Topology, sample_network
from mcnoma.harness import SimConfig, run_trials, summarize_cdf, sweep_edge_location

FAST = ("OMA", "OMA-FFR", "NOMA", "NOMA-TDM", "NOMA-JT", "NOMA-DCS")


def _cfg(**kw):
    base = dict(trials=12, chunk_size=5, cb_max_iter=5)
    base.update(kw)
    return SimConfig(**base)


@pytest.mark.parametrize("kw", [
    dict(trials=0), dict(schemes=()), dict(schemes=("OMA", "OMA")), dict(schemes=("FOO",)),
    dict(rate_convention="third"), dict(center_share=1.5), dict(ffr_center_band=0.0),
    dict(antennas=2), dict(chunk_size=0),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_run_is_deterministic_and_shaped():
    cfg = _cfg()
    a, b = run_trials(cfg), run_trials(cfg)
    for s in cfg.schemes:
        np.testing.assert_array_equal(a.rates[s], b.rates[s])
    assert a.trials.tolist() == list(range(12)) and a.skipped == []
    assert a.rates["NOMA"].shape == (12, 16)
    assert a.rates["NOMA-JT"].shape == (12, 12)
    assert a.is_edge["NOMA"].sum() == 8 and a.is_edge["NOMA-JT"].sum() == 4


def test_worker_count_does_not_matter():
    cfg = _cfg(trials=10, chunk_size=3)
    one, two = run_trials(cfg, workers=1), run_trials(cfg, workers=2)
    for s in cfg.schemes:
        np.testing.assert_array_equal(one.rates[s], two.rates[s])
    assert one.channel_hashes == two.channel_hashes


def test_chunking_does_not_matter():
    a = run_trials(_cfg(trials=7, chunk_size=7))
    b = run_trials(_cfg(trials=7, chunk_size=2))
    for s in a.rates:
        np.testing.assert_allclose(a.rates[s], b.rates[s], rtol=1e-12)


def test_seed_changes_results():
    a = run_trials(_cfg(trials=3, schemes=FAST))
    b = run_trials(_cfg(trials=3, schemes=FAST, seed=7))
    assert not np.array_equal(a.rates["NOMA"], b.rates["NOMA"])


def test_paired_draws_are_hashed_per_trial():
    cfg = _cfg(trials=4, schemes=FAST)
    res = run_trials(cfg)
    want = [sample_network(cfg.seed, cfg.topology, cfg.link_budget, 4, t).mimo.digest() for t in range(4)]
    assert res.channel_hashes == want


def test_noma_is_twice_tdm_without_cross_channels():
    cfg = _cfg(trials=5, schemes=("NOMA", "NOMA-TDM"))
    mimo, scalar, _ = harness._sample_batch(cfg, range(5), None)
    out = harness._evaluate(cfg, mimo.without_ici(), scalar)
    np.testing.assert_array_equal(out["NOMA"][0], 2 * out["NOMA-TDM"][0])


def test_failing_trial_is_skipped_for_every_scheme(monkeypatch):
    cfg = _cfg(trials=8, chunk_size=4, schemes=FAST)
    bad = sample_network(cfg.seed, cfg.topology, cfg.link_budget, 4, 5).mimo.digest()
    real = harness._evaluate

    def flaky(cfg, mimo, scalar):
        for t in range(mimo.H.shape[0]):
            if MimoNetworkChannel(mimo.H[t]).digest() == bad:
                raise FloatingPointError("synthetic failure")
        return real(cfg, mimo, scalar)

    monkeypatch.setattr(harness, "_evaluate", flaky)
    res = run_trials(cfg)
    assert res.skipped == [5]
    assert res.trials.tolist() == [0, 1, 2, 3, 4, 6, 7]
    assert {r.shape[0] for r in res.rates.values()} == {7}
    monkeypatch.setattr(harness, "_evaluate", real)
    full = run_trials(cfg)
    for s in FAST:
        np.testing.assert_array_equal(res.rates[s], np.delete(full.rates[s], 5, axis=0))


def test_every_trial_failing(monkeypatch):
    def broken(*a):
        raise FloatingPointError("nope")

    monkeypatch.setattr(harness, "_evaluate", broken)
    with pytest.raises(RuntimeError):
        run_trials(_cfg(trials=2))


def test_bad_arguments():
    with pytest.raises(ValueError):
        run_trials(_cfg(), workers=0)
    with pytest.raises(ValueError):
        run_trials(_cfg(), edge_distance=0.3)
    with pytest.raises(ValueError):
        sweep_edge_location(_cfg(), [0.1, 0.0])
    with pytest.raises(ValueError):
        sweep_edge_location(_cfg(), [0.26])
    with pytest.raises(ValueError):
        sweep_edge_location(_cfg(), [])


def test_sweep_point_matches_run_trials():
    cfg = _cfg(trials=10, schemes=FAST + ("NOMA-CB",))
    d = 0.1875
    rows = sweep_edge_location(cfg, [d])
    res = run_trials(cfg, edge_distance=d)
    assert [r.scheme for r in rows] == list(cfg.schemes)
    for r in rows:
        assert r.location_km == d
        assert r.edge_rate == pytest.approx(res.edge(r.scheme).mean(), rel=1e-15)
        assert r.center_rate == pytest.approx(res.center(r.scheme).mean(), rel=1e-15)


def test_single_cell_edge_rate_falls_with_distance():
    cfg = SimConfig(trials=200, schemes=("OMA", "NOMA"))
    rows = sweep_edge_location(cfg)
    for s in cfg.schemes:
        edge = [r.edge_rate for r in rows if r.scheme == s]
        assert len(edge) == 10
        assert np.all(np.diff(edge) < 0)


def test_cdf_examples():
    c = summarize_cdf([5, 1, 3, 2, 4])
    assert c.mean == 3
    assert c.percentile(0) == 1 and c.percentile(100) == 5
    assert c.percentile(50) == 3 and c.percentile(12.5) == 1.5
    u = np.random.default_rng(0).random(10_000)
    assert summarize_cdf(u).percentile(5) == pytest.approx(0.05, abs=0.01)
    with pytest.raises(ValueError):
        summarize_cdf([])
    with pytest.raises(ValueError):
        c.percentile(101)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60), st.floats(0, 100))
def test_cdf_properties(xs, p):
    c = summarize_cdf(xs)
    assert np.all(np.diff(c.samples) >= 0)
    assert c.samples.min() <= c.percentile(p) <= c.samples.max()
    grid = np.linspace(min(xs) - 1, max(xs) + 1, 50)
    F = c.cdf(grid)
    assert np.all((F >= 0) & (F <= 1)) and np.all(np.diff(F) >= 0)
    assert F[0] == 0 and F[-1] == 1
