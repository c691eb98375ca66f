import math

import numpy as np
import pytest

import nplme

SMALL = {
    "seed": 5,
    "replications": 2,
    "me_scale_grid": [1.0],
    "dgp": {"n": 40},
    "methods": ["npl_nopseudo", "nls"],
    "npl": {"B_boot": 3, "optimizer": {"iters": 30}},
    "hmc": {"n_chains": 2, "warmup": 100, "iters": 100},
}


def naive_mmd2_u(a, b, l):
    k = lambda x, y: np.exp(-np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=2) / (2 * l * l))
    kaa, kbb, kab = k(a, a), k(b, b), k(a, b)
    n, m = len(a), len(b)
    return ((kaa.sum() - np.trace(kaa)) / (n * (n - 1)) + (kbb.sum() - np.trace(kbb)) / (m * (m - 1))
            - 2 * kab.mean())


def test_mmd_matches_numpy():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(5, 2)), rng.normal(size=(4, 2)) + 0.5
    assert nplme.mmd2_unbiased(a, b, 0.8) == pytest.approx(naive_mmd2_u(a, b, 0.8), abs=1e-12)
    d0, d1 = np.array([0.0]), np.array([1.0])
    assert nplme.mmd2_weighted(d0, [1.0], d1, [1.0], 1.0) == pytest.approx(2 - 2 * math.exp(-0.5), abs=1e-12)


def test_simulate_and_fit():
    data = nplme.simulate(SMALL, sigma_N=1.0, n=40, seed=3)
    assert data["w"].shape == (40,)
    out = nplme.fit(data["w"], data["y"], {**SMALL, "npl": {**SMALL["npl"], "pseudo": False}}, seed=2)
    assert out["theta"].shape == (3, 3)
    assert np.all(np.isfinite(out["theta"]))
    again = nplme.fit(data["w"], data["y"], {**SMALL, "npl": {**SMALL["npl"], "pseudo": False}}, seed=2)
    assert np.array_equal(out["theta"], again["theta"])


def test_baselines_and_methods():
    data = nplme.simulate(SMALL, sigma_N=0.5, n=40, seed=4)
    theta = nplme.nls_fit(data["w"], data["y"], "sigmoid")
    assert len(theta) == 3
    est = nplme.estimate_methods(data["w"], data["y"], ["nls", "simex"], SMALL)
    assert est["nls"] == pytest.approx(theta)


def test_bench_rows():
    rows = nplme.run_bench(SMALL)
    assert {r["method"] for r in rows} == {"npl_nopseudo", "nls"}
    assert all(r["count"] == 2 for r in rows)


def test_config_errors_carry_paths():
    with pytest.raises(nplme.ConfigError, match=r"\$\.npl\.m"):
        nplme.canonical_config({"npl": {"m": "three"}})
    assert nplme.config_hash({"seed": 1}) == nplme.config_hash('{"seed": 1}')
    assert nplme.canonical_config()["npl"]["m"] == 3


def test_diagnostics():
    rng = np.random.default_rng(1)
    chains = [list(rng.normal(size=500)) for _ in range(4)]
    assert nplme.split_rhat(chains) < 1.02
    assert nplme.ess_bulk(chains) > 1000
