import math

import pytest

import annealab


def test_catalog_and_landscape():
    assert "double_well" in annealab.catalog_ids()
    dw = annealab.landscape("double_well", {"a": 0.2})
    assert dw.dim == 1
    assert dw.value([1.0]) == pytest.approx(0.2)
    assert dw.gradient([1.0]) == pytest.approx([0.2])


def test_unknown_landscape_raises():
    with pytest.raises(annealab.AnnealabError):
        annealab.landscape("volcano")


def test_depth_matches_oracle():
    rep = annealab.depth("double_well", {"a": 0.2}, cells=16384)
    assert rep["critical_depth"] == pytest.approx(0.807572128628269, abs=1e-3)
    assert rep["dominating_index"] == 1


def test_validate_schedule_verdicts():
    assert annealab.validate_schedule(0.75, 0.5)["verdict"] == "valid"
    assert annealab.validate_schedule(0.4, 0.5)["verdict"] == "invalid"


def test_gibbs_tail_normal():
    p = annealab.gibbs_tail("quadratic", {"half_width": 8}, 1.0, 0.5, cells=65536)
    assert p == pytest.approx(0.31731050786291410, abs=1e-6)


def test_spectral_gap_ou():
    assert annealab.spectral_gap("quadratic", {"half_width": 8}, 0.5) == pytest.approx(1.0, rel=0.01)
    rep = annealab.spectral("double_well", {"a": 0.2}, [0.15, 0.1, 0.05], cells=4096)
    assert rep["fitted_barrier"] == pytest.approx(0.8076, rel=0.1)


def test_rate_exponent():
    assert annealab.rate_exponent(1.5, 1.0, 0.3) == pytest.approx(1 / 6)


def test_simulate_chain_deterministic():
    dw = annealab.landscape("double_well", {"a": 0.2})
    a = annealab.simulate_chain(dw, [1.0], 0.02, 0.75, 1.2, 500, seed=4, chain_id=2)
    b = annealab.simulate_chain(dw, [1.0], 0.02, 0.75, 1.2, 500, seed=4, chain_id=2)
    c = annealab.simulate_chain(dw, [1.0], 0.02, 0.75, 1.2, 500, seed=4, chain_id=3)
    assert a == b
    assert a != c
    assert math.isfinite(a[0])


def test_anneal_and_fit(tmp_path):
    config = {
        "landscape": {"id": "triple_well"},
        "cooling": {"E": 1.5},
        "n_chains": 40,
        "checkpoints": [10, 100, 1000],
        "seed": 1,
        "output_dir": str(tmp_path / "run"),
        "burn_in_theta": 0.0,
        "min_exceed": 1,
    }
    result = annealab.anneal(config, workers=2)
    assert result["status"] in ("complete", "failed")
    assert result["resolved"]["max_k"] == 1000
    tail = (tmp_path / "run" / "tail.csv").read_text()
    assert tail.startswith("k,theta,tau,n,n_exceed,p_hat,ci_lo,ci_hi")
    again = annealab.anneal(config, workers=1)
    assert again["content_hash"] == result["content_hash"]


def test_bad_config_raises(tmp_path):
    with pytest.raises(annealab.AnnealabError):
        annealab.anneal({"bogus": 1, "output_dir": str(tmp_path)})
