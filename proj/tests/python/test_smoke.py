import math

import numpy as np
import pytest

import pmhmc


def gaussian(T=30):
    return pmhmc.Model({"model.name": "gaussian", "model.T": str(T), "data.seed": "2017"})


def test_model_properties():
    m = gaussian()
    assert m.name == "gaussian"
    assert (m.dim_theta, m.data_count, m.latent_dim) == (1, 30, 1)
    assert m.parameter_names == ["theta"]
    mean, sd = m.posterior()
    assert sd > 0 and math.isfinite(mean)


def test_evaluate_gradient_matches_finite_difference():
    m = gaussian(4)
    rng = np.random.default_rng(3)
    u = rng.standard_normal((4, 5, 1))
    theta = np.array([0.3])
    e = m.evaluate(theta, u)
    assert e["grad_u"].shape == u.shape
    assert np.isclose(e["per_datum_log"].sum(), e["log_phat"])
    h = 1e-5
    fd = (m.evaluate(theta + h, u)["log_phat"] - m.evaluate(theta - h, u)["log_phat"]) / (2 * h)
    assert abs(fd - e["grad_theta"][0]) < 1e-6 * max(1.0, abs(fd))


def test_pm_hmc_chain_recovers_posterior_mean():
    m = gaussian()
    cfg = {"sampler.kind": "pm_hmc", "sampler.n": "8", "sampler.iterations": "3000",
           "sampler.burn_in": "300", "seed": "5"}
    out = pmhmc.sample(m, cfg)
    assert out["theta"].shape == (3000, 1)
    assert out["burn_in"].sum() == 300
    x = out["theta"][~out["burn_in"], 0]
    mean, sd = m.posterior()
    mcse = x.std() / math.sqrt(pmhmc.ess(list(x)))
    assert abs(x.mean() - mean) < 5 * mcse
    acf = pmhmc.autocorrelation(list(x), 5)
    assert acf[0] == pytest.approx(1.0)


def test_sampling_is_deterministic():
    m = gaussian(10)
    cfg = {"sampler.kind": "pm_slice", "sampler.n": "4", "sampler.iterations": "50",
           "sampler.tuning_iterations": "100", "seed": "2"}
    a = pmhmc.sample(m, cfg)["theta"]
    b = pmhmc.sample(m, cfg)["theta"]
    assert np.array_equal(a, b)


def test_bad_configuration_raises():
    with pytest.raises(pmhmc.ConfigError):
        pmhmc.Model({"model.name": "gaussian", "model.bogus": "1"})
    with pytest.raises(ValueError):
        pmhmc.Model({"model.name": "nope"})


def test_cli_exit_codes(tmp_path):
    assert pmhmc.cli(["sample", str(tmp_path / "missing.cfg")]) == 1
    cfg = tmp_path / "g.cfg"
    cfg.write_text("model.name = gaussian\nmodel.T = 5\nseed = 1\n")
    assert pmhmc.cli(["generate", str(cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "data.csv").exists()
