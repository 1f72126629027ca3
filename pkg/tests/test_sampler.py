"""Sampler checks: error analysis on synthetic series, chain mechanics with
stubbed engines, and end-to-end agreement with the enumeration oracle."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dephlab.defect import ConfigWeight, DefectEngine
from dephlab.errors import ConfigError, ConfigurationNode, SignProblem
from dephlab.exact import build_exact_state, exact_renyi2_correlator
from dephlab.model import BilinearSpec, build_model
from dephlab.sampler import (
    BinnedEstimate,
    PairMeasurement,
    SamplerConfig,
    _merge_binned,
    binned_stats,
    free_values,
    run_chain,
    sample_correlators,
)

SZ = np.diag([1.0, -1.0])


def chain(L, boundary="open", n_flavors=2, g=1.0, **kw):
    return build_model("chain", L=L, boundary=boundary, n_flavors=n_flavors, g=g, **kw)


def onsite_pair(x, y, mu=3, om=SZ, envelope=False, name=None):
    a = BilinearSpec(x=x, mu=mu, omega=om)
    b = BilinearSpec(x=y, mu=mu, omega=om)
    return PairMeasurement(name=name or f"C{x}{y}", a=a, b=b, envelope=envelope)


# ---- binning analysis ----------------------------------------------------------


def test_binned_stats_iid():
    rng = np.random.default_rng(0)
    x = rng.normal(size=8192)
    est = binned_stats(x)
    naive = x.std(ddof=1) / np.sqrt(x.size)
    assert est.mean == pytest.approx(x.mean())
    assert est.n_samples == 8192
    # iid data: the doubling curve stays flat at the naive error
    assert est.stderr == pytest.approx(naive, rel=0.25)


def test_binned_stats_correlated_series_inflates_error():
    # AR(1): exact stderr of the mean is sigma/sqrt(n) * sqrt((1+rho)/(1-rho))
    rho, n = 0.9, 65536
    rng = np.random.default_rng(1)
    x = np.empty(n)
    x[0] = rng.normal()
    for i in range(1, n):
        x[i] = rho * x[i - 1] + np.sqrt(1 - rho**2) * rng.normal()
    est = binned_stats(x)
    naive = x.std(ddof=1) / np.sqrt(n)
    truth = np.sqrt((1 + rho) / (1 - rho)) / np.sqrt(n)
    assert est.stderr > 2.5 * naive
    assert est.stderr == pytest.approx(truth, rel=0.35)
    # curve is increasing toward the plateau
    errs = [e for _, e in est.binning]
    assert errs[0] < errs[-1]


def test_binned_stats_complex_series():
    rng = np.random.default_rng(2)
    z = rng.normal(size=4096) + 1j * rng.normal(size=4096)
    est = binned_stats(z)
    expected = np.sqrt(
        (np.var(z.real, ddof=1) + np.var(z.imag, ddof=1)) / z.size
    )
    assert est.stderr == pytest.approx(expected, rel=0.3)


def test_binned_stats_edge_cases():
    one = binned_stats([3.0])
    assert one.mean == 3.0 and one.stderr == 0.0 and one.binning == ()
    with pytest.raises(ConfigError):
        binned_stats([])
    const = binned_stats(np.ones(64))
    assert const.stderr == 0.0


# ---- chain merging -------------------------------------------------------------


def _be(mean, err, n=100):
    return BinnedEstimate(mean=complex(mean), stderr=err, n_samples=n, binning=())


def test_merge_inverse_variance():
    merged = _merge_binned([_be(1.0, 0.1), _be(2.0, 0.2)])
    w1, w2 = 1 / 0.1**2, 1 / 0.2**2
    assert merged.mean == pytest.approx((w1 * 1.0 + w2 * 2.0) / (w1 + w2))
    assert merged.stderr == pytest.approx(1 / np.sqrt(w1 + w2))
    assert merged.n_samples == 200


def test_merge_zero_variance_falls_back_to_plain_mean():
    merged = _merge_binned([_be(1.0, 0.0), _be(3.0, 0.5)])
    assert merged.mean == pytest.approx(2.0)
    assert merged.stderr == pytest.approx(0.5)


def test_merge_single_chain_passthrough():
    est = _be(1.5, 0.3)
    assert _merge_binned([est]) is est


# ---- g = 0 bypass --------------------------------------------------------------


def test_g_zero_evaluates_without_sampling():
    model = chain(3, "periodic", g=0.0)
    meas = [onsite_pair(0, 1, envelope=True)]
    res = sample_correlators(model, SamplerConfig(n_sweeps=10), meas)
    assert res.sampled is False
    assert res.chains == ()
    est = res.estimates["C01"]
    assert est.full.stderr == 0.0
    eng = DefectEngine(model)
    gl, gg = eng.greens(eng.zero_field())
    ref = eng.correlator(gl, gg, meas[0].a, meas[0].b)
    assert est.full.mean == pytest.approx(ref.full, abs=1e-14)
    assert est.one_a == pytest.approx(ref.one_a, abs=1e-14)
    assert est.worst_margin is not None and est.worst_margin >= -1e-12


def test_free_values_match_dephasing_free_exact_state():
    # at g = 0 the doubled state is a pure Slater determinant, so the
    # deterministic evaluation must agree with the enumeration module
    model = chain(3, "periodic", g=0.0)
    st = build_exact_state(model)
    a = BilinearSpec(x=0, mu=1, omega=SZ)
    b = BilinearSpec(x=2, mu=1, omega=SZ)
    ref = exact_renyi2_correlator(st, a, b)
    vals = free_values(DefectEngine(model), [PairMeasurement("p", a, b)])
    assert vals["p"].full.mean == pytest.approx(ref.full, abs=1e-12)


def test_run_chain_rejects_g_zero():
    eng = DefectEngine(chain(2, g=0.0))
    with pytest.raises(ConfigError, match="g > 0"):
        run_chain(eng, SamplerConfig(), [])


# ---- chain mechanics -----------------------------------------------------------


def test_same_seed_reproduces_everything():
    model = chain(3, "periodic", g=0.7)
    cfg = SamplerConfig(n_sweeps=40, n_burnin=10, seed=11, n_chains=2)
    meas = [onsite_pair(0, 1, envelope=True)]
    r1 = sample_correlators(model, cfg, meas)
    r2 = sample_correlators(model, cfg, meas)
    e1, e2 = r1.estimates["C01"], r2.estimates["C01"]
    assert e1.full.mean == e2.full.mean
    assert e1.full.stderr == e2.full.stderr
    assert e1.worst_margin == e2.worst_margin
    assert [c.acceptance_rate for c in r1.chains] == [
        c.acceptance_rate for c in r2.chains
    ]


def test_chains_are_independent_streams():
    eng = DefectEngine(chain(3, "periodic", g=0.7))
    cfg = SamplerConfig(n_sweeps=30, n_burnin=5, seed=11)
    meas = [onsite_pair(0, 1)]
    c0 = run_chain(eng, cfg, meas, chain_index=0)
    c1 = run_chain(eng, cfg, meas, chain_index=1)
    assert c0.estimates["C01"].full.mean != c1.estimates["C01"].full.mean


def test_measure_every_thins_series():
    eng = DefectEngine(chain(2, g=1.0))
    cfg = SamplerConfig(n_sweeps=20, n_burnin=2, measure_every=4)
    out = run_chain(eng, cfg, [onsite_pair(0, 1)])
    assert out.n_measured == 5
    assert out.n_nodes == 0


def test_autotune_tames_oversized_steps():
    model = chain(2, g=0.5)
    eng = DefectEngine(model)
    cfg = SamplerConfig(n_sweeps=200, n_burnin=800, proposal_sigma=8.0, seed=3)
    out = run_chain(eng, cfg, [onsite_pair(0, 1)])
    assert out.proposal_sigma < 8.0
    assert 0.2 < out.acceptance_rate < 0.75
    frozen = SamplerConfig(
        n_sweeps=50, n_burnin=100, proposal_sigma=8.0, seed=3, autotune=False
    )
    assert run_chain(eng, frozen, [onsite_pair(0, 1)]).proposal_sigma == 8.0


def test_sign_guard_raises(monkeypatch):
    eng = DefectEngine(chain(2, g=1.0))
    bad = ConfigWeight(
        log_abs_amplitude=0.0,
        amplitude_sign=-1.0,
        unit_phase=1.0,
        reality_margin=0.0,
        gaussian_exponent=0.0,
        flavor_power=2,
    )
    calls = {"n": 0}
    real_weight = eng.weight

    def weight(phi, mats=None):
        calls["n"] += 1
        return real_weight(phi, mats) if calls["n"] == 1 else bad

    monkeypatch.setattr(eng, "weight", weight)
    with pytest.raises(SignProblem):
        run_chain(eng, SamplerConfig(n_sweeps=5, n_burnin=0), [onsite_pair(0, 1)])


def test_nodes_are_counted_and_skipped(monkeypatch):
    eng = DefectEngine(chain(2, g=1.0))
    real_greens = eng.greens
    calls = {"n": 0}

    def greens(phi, mats=None):
        calls["n"] += 1
        if calls["n"] % 2:
            raise ConfigurationNode("stub node")
        return real_greens(phi, mats)

    monkeypatch.setattr(eng, "greens", greens)
    out = run_chain(
        eng, SamplerConfig(n_sweeps=10, n_burnin=0), [onsite_pair(0, 1)]
    )
    assert out.n_nodes == 5
    assert out.n_measured == 5


def test_all_nodes_is_an_error(monkeypatch):
    eng = DefectEngine(chain(2, g=1.0))

    def greens(phi, mats=None):
        raise ConfigurationNode("stub node")

    monkeypatch.setattr(eng, "greens", greens)
    with pytest.raises(ConfigError, match="node"):
        run_chain(eng, SamplerConfig(n_sweeps=4, n_burnin=0), [onsite_pair(0, 1)])


def test_config_validation():
    with pytest.raises(ConfigError):
        SamplerConfig(n_sweeps=0)
    with pytest.raises(ConfigError):
        SamplerConfig(measure_every=0)
    with pytest.raises(ConfigError):
        SamplerConfig(n_chains=0)
    with pytest.raises(ConfigError):
        SamplerConfig(proposal_sigma=-0.1)
    with pytest.raises(ConfigError, match="unique"):
        sample_correlators(
            chain(2), SamplerConfig(), [onsite_pair(0, 1), onsite_pair(0, 1)]
        )


# ---- statistical agreement with the oracle --------------------------------------


@pytest.mark.parametrize("mu,x,y", [(3, 0, 1), (1, 0, 1)])
def test_two_site_estimates_match_enumeration(mu, x, y):
    model = chain(2, g=0.8)
    st = build_exact_state(model)
    meas = [onsite_pair(x, y, mu=mu, envelope=True)]
    ref = exact_renyi2_correlator(st, meas[0].a, meas[0].b)
    cfg = SamplerConfig(n_sweeps=3000, n_burnin=300, seed=5, n_chains=2)
    res = sample_correlators(model, cfg, meas)
    est = res.estimates[next(iter(res.estimates))]
    err = max(est.full.stderr, 1e-4)
    assert abs(est.full.mean - ref.full) < 5 * err
    assert est.n_violations == 0
    assert est.worst_margin >= -1e-10


def test_three_site_ring_estimate_and_envelope():
    model = chain(3, "periodic", g=1.2)
    st = build_exact_state(model)
    meas = [
        onsite_pair(0, 1, mu=3, envelope=True, name="z01"),
        onsite_pair(0, 2, mu=1, envelope=True, name="x02"),
    ]
    refs = {
        m.name: exact_renyi2_correlator(st, m.a, m.b).full for m in meas
    }
    cfg = SamplerConfig(n_sweeps=2500, n_burnin=300, seed=7, n_chains=2)
    res = sample_correlators(model, cfg, meas)
    assert res.sampled is True
    for name, ref in refs.items():
        est = res.estimates[name]
        err = max(est.full.stderr, 1e-4)
        assert abs(est.full.mean - ref) < 5 * err
        # the envelope dominates the estimate configuration by configuration
        assert est.n_violations == 0
        assert est.bound.mean.real >= abs(est.full.mean) - 5 * err


def test_estimates_serialize_to_json():
    model = chain(2, g=0.6)
    meas = [onsite_pair(0, 1, envelope=True)]
    res = sample_correlators(
        model, SamplerConfig(n_sweeps=50, n_burnin=20, seed=1), meas
    )
    blob = json.dumps({k: v.as_dict() for k, v in res.estimates.items()})
    back = json.loads(blob)
    assert "bound" in back["C01"]
    assert back["C01"]["full"]["n_samples"] == 100
