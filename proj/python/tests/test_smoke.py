import json
import math

import numpy as np
import pytest

import betaunc


def test_special_functions():
    assert betaunc.ln_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-14)
    assert betaunc.ln_beta(2.0, 3.0) == pytest.approx(math.log(1.0 / 12.0), rel=1e-13)
    # psi(x + 1) = psi(x) + 1/x
    assert betaunc.digamma(3.5) == pytest.approx(betaunc.digamma(2.5) + 1.0 / 2.5, rel=1e-13)
    da, db = betaunc.beta_nll_grad(0.7, 3.2, 1.4)
    h = 1e-6
    fd = (-betaunc.beta_log_pdf(0.7, 3.2 + h, 1.4) + betaunc.beta_log_pdf(0.7, 3.2 - h, 1.4)) / (2 * h)
    assert da == pytest.approx(fd, rel=1e-6)


def test_mixture_summary_and_density():
    s = betaunc.mixture_summary([(1.0, 1.0)])
    assert s["mean"] == pytest.approx(0.5)
    assert s["uncertainty"] == pytest.approx(1.0 / 3.0)
    s = betaunc.mixture_summary([(50.0, 1.0), (1.0, 50.0)])
    assert s["uncertainty"] == pytest.approx(4.0 * s["variance"])
    assert 0.0 <= s["uncertainty"] <= 1.0
    grid = betaunc.density_grid([(4.0, 6.0)], 2001, 1e-4)
    t = np.array([p[0] for p in grid])
    f = np.array([p[1] for p in grid])
    assert np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(t)) == pytest.approx(1.0, abs=1e-3)


def test_invalid_input_raises():
    with pytest.raises(ValueError):
        betaunc.ln_beta(-1.0, 2.0)
    with pytest.raises(ValueError):
        betaunc.Model.build("no-such-preset", 0)
    with pytest.raises(betaunc.DataError):
        betaunc.Model.load("/nonexistent/model.bgc")


def test_model_predict_and_round_trip(tmp_path):
    model = betaunc.Model.build("tiny", 3)
    assert model.input_length == 256
    assert model.spatial_chain() == [128, 64, 32, 1]
    rng = np.random.default_rng(0)
    rec = betaunc.Record("r0", rng.standard_normal(900).astype(np.float32))
    p = model.predict(rec)
    assert len(p.components) == 4
    assert p.uncertainty == pytest.approx(4.0 * p.variance)
    assert p.predicted_class == int(p.mean >= 0.5)
    assert json.loads(p.to_json())["id"] == "r0"

    path = tmp_path / "m.bgc"
    model.save(path)
    again = betaunc.Model.load(path).predict(rec)
    assert again.components == p.components
    assert betaunc.Model.build("paper", 0).parameter_count == 21062


def test_train_predict_reject():
    records = betaunc.synth_generate(8, seed=4, max_seconds=20.0)
    assert len(records) == 16
    assert {r.target for r in records} == {0.0, 1.0}
    cfg = "arch_preset=tiny\nbatch_size=16\nepochs=2\nsteps_per_epoch=2\npatience=0\nseed=4\n"
    model, log = betaunc.train(cfg, records[:12], records[12:])
    assert len(json.loads(log)["epochs"]) == 2
    preds = model.predict_all(records)
    kept = betaunc.reject_by_uncertainty(preds, 0.5)
    assert sum(p.accepted for p in kept) == 8
    assert all(p.accepted is None for p in preds)
    rep = betaunc.evaluate(kept, only_accepted=True)
    assert rep["n_evaluated"] == 8
    assert rep["csv"].startswith("class,precision,recall,f1\n")


def test_cli_in_process(tmp_path):
    code, out, _ = betaunc.run_cli(["--help"])
    assert code == 0 and "Exit codes" in out
    code, _, _ = betaunc.run_cli(["synth", "--out", str(tmp_path / "d"), "--n-per-class", "3", "--seed", "1"])
    assert code == 0
    train, val = betaunc.load_dataset(tmp_path / "d")
    assert len(train) + len(val) == 6
    assert betaunc.run_cli(["bogus"])[0] == 1
