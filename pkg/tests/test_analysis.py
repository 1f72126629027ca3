"""Analysis checks on synthetic data with known answers."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dephlab.analysis import (
    bond_current,
    coarse_grain,
    current_structure_factor,
    distance_profile,
    fit_decay,
    goldstone_bound_check,
    goldstone_data_from_state,
    raising_bilinear,
    structure_factor,
)
from dephlab.errors import ConfigError
from dephlab.exact import build_exact_state, exact_renyi2_correlator
from dephlab.model import build_model


# ---- coarse graining -----------------------------------------------------------


def test_coarse_grain_window_one_is_identity():
    v = np.arange(6, dtype=float)
    assert_allclose(coarse_grain(v, 1), v)


def test_coarse_grain_constant_series():
    assert_allclose(coarse_grain(3.5 * np.ones(8), 4), 3.5 * np.ones(8))


def test_coarse_grain_full_window_is_global_mean():
    v = np.array([1.0, 2.0, 4.0, 9.0])
    assert_allclose(coarse_grain(v, 4), v.mean() * np.ones(4))


def test_coarse_grain_ring_wraps():
    v = np.array([1.0, 0.0, 0.0, 0.0])
    assert_allclose(coarse_grain(v, 2), [0.5, 0.0, 0.0, 0.5])


def test_coarse_grain_open_truncates():
    v = np.array([1.0, 3.0, 5.0, 7.0])
    assert_allclose(coarse_grain(v, 2, periodic=False), [2.0, 4.0, 6.0])


def test_coarse_grain_validation():
    with pytest.raises(ConfigError):
        coarse_grain(np.ones(4), 0)
    with pytest.raises(ConfigError):
        coarse_grain(np.ones(4), 5)
    with pytest.raises(ConfigError):
        coarse_grain(np.ones((2, 2)), 1)


# ---- distance profiles ---------------------------------------------------------


def test_distance_profile_minimum_image():
    geo = build_model("chain", L=6, boundary="periodic").geometry
    pairs = [(0, 1, 2.0), (1, 2, 4.0), (0, 5, 6.0), (0, 2, 1.0), (0, 3, 9.0)]
    rs, cs, counts = distance_profile(geo, pairs)
    assert_allclose(rs, [1.0, 2.0, 3.0])
    assert_allclose(cs, [4.0, 1.0, 9.0])  # (2+4+6)/3 at r=1
    assert list(counts) == [3, 1, 1]


def test_distance_profile_empty():
    geo = build_model("chain", L=4).geometry
    with pytest.raises(ConfigError):
        distance_profile(geo, [])


# ---- decay fits ----------------------------------------------------------------


def test_power_law_fit_recovers_scaling_dimension():
    r = np.arange(1, 13, dtype=float)
    c = 2.5 * r**-2.0
    fit = fit_decay(r, c, kind="power")
    assert fit.kind == "power"
    assert fit.scaling_dimension == pytest.approx(1.0, abs=1e-10)
    assert fit.amplitude == pytest.approx(2.5, rel=1e-10)
    assert fit.residual < 1e-12
    assert fit.r_window == (2.0, 12.0)  # default drops r < 2


def test_exponential_fit_recovers_correlation_length():
    r = np.arange(1, 13, dtype=float)
    c = 0.7 * np.exp(-r / 3.0)
    fit = fit_decay(r, c, kind="exp")
    assert fit.correlation_length == pytest.approx(3.0, abs=1e-10)


def test_auto_fit_discriminates_forms():
    r = np.arange(1, 16, dtype=float)
    assert fit_decay(r, r**-1.4, kind="auto").kind == "power"
    assert fit_decay(r, np.exp(-r / 2.0), kind="auto").kind == "exp"


def test_fit_handles_noise_and_signs():
    rng = np.random.default_rng(4)
    r = np.arange(1, 20, dtype=float)
    c = r**-2.0 * (1 + 0.01 * rng.normal(size=r.size))
    c[::2] *= -1  # staggered correlator, fit uses |C|
    fit = fit_decay(r, c, kind="power")
    assert fit.scaling_dimension == pytest.approx(1.0, abs=0.02)


def test_fit_window_and_validation():
    r = np.arange(1, 10, dtype=float)
    c = r**-1.0
    fit = fit_decay(r, c, r_min=3, r_max=7)
    assert fit.r_window == (3.0, 7.0)
    assert fit.n_points == 5
    with pytest.raises(ConfigError, match="at least"):
        fit_decay(r, c, r_min=8.5)
    with pytest.raises(ConfigError, match="kind"):
        fit_decay(r, c, kind="stretched")
    with pytest.raises(ConfigError):
        fit_decay(r, c[:-1])
    with pytest.raises(ConfigError):
        fit_decay(r, c, kind="exp", min_points=20)
    with pytest.raises(ConfigError):
        fit_decay(np.array([1.0]), np.array([1.0]), min_points=1, r_min=0.5)
        # single point cannot pin a line
    zeros = np.zeros_like(r)
    with pytest.raises(ConfigError):
        fit_decay(r, zeros)  # log of nothing


def test_property_kind_guards():
    r = np.arange(1, 10, dtype=float)
    power = fit_decay(r, r**-2.0, kind="power")
    with pytest.raises(ConfigError):
        power.correlation_length
    expfit = fit_decay(r, np.exp(-r), kind="exp")
    with pytest.raises(ConfigError):
        expfit.scaling_dimension


def test_flat_exponential_reports_infinite_length():
    r = np.arange(1, 10, dtype=float)
    fit = fit_decay(r, np.ones_like(r), kind="exp")
    assert fit.correlation_length == np.inf
    assert fit.as_dict()["correlation_length"] is None


# ---- structure factors ---------------------------------------------------------


def test_structure_factor_of_cosine_peaks():
    L, q = 12, 3
    r = np.arange(L)
    c = np.cos(2 * np.pi * q * r / L)
    k, s = structure_factor(c)
    assert s.dtype.kind == "f"  # Hermitian profile gives a real S
    expected = np.zeros(L)
    expected[q] = expected[L - q] = L / 2
    assert_allclose(s, expected, atol=1e-10)
    assert k[q] == pytest.approx(2 * np.pi * q / L)


def test_structure_factor_constant_profile():
    k, s = structure_factor(np.ones(8))
    assert s[0] == pytest.approx(8.0)
    assert_allclose(s[1:], np.zeros(7), atol=1e-12)


def test_structure_factor_non_hermitian_stays_complex():
    c = np.zeros(6, dtype=complex)
    c[1] = 1.0  # no matching conj at r = 5
    _, s = structure_factor(c)
    assert np.iscomplexobj(s)
    with pytest.raises(ConfigError):
        structure_factor(np.zeros(0))


# ---- current response ----------------------------------------------------------


def test_current_structure_factor_psd_is_nonnegative():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 6))
    cov = a @ a.T
    for k in np.pi / np.array([1, 2, 3]):
        assert current_structure_factor(cov, k) >= 0


def test_current_structure_factor_circulant_matches_fft():
    L = 8
    row = np.array([2.0, -0.7, 0.1, 0.0, 0.0, 0.0, 0.1, -0.7])
    cov = np.array([np.roll(row, i) for i in range(L)])
    k = 2 * np.pi * 3 / L
    expected = np.real(np.sum(row * np.exp(1j * k * np.arange(L))))
    assert current_structure_factor(cov, k) == pytest.approx(expected)


def test_current_structure_factor_validation():
    with pytest.raises(ConfigError):
        current_structure_factor(np.ones((2, 3)), 1.0)
    with pytest.raises(ConfigError):
        current_structure_factor(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)


# ---- sum-rule check ------------------------------------------------------------


def _psd_cov(L, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(L, L))
    return a @ a.T


def test_goldstone_check_saturating_data_has_zero_margin():
    L, q = 4, 2.0
    cov = _psd_cov(L)
    fourpoint = np.array([0.0, 0.9, 1.3, 0.4])
    oo = np.zeros(L)
    for r in (1, 2, 3):
        k = np.pi / r
        lhs = k**2 * current_structure_factor(cov, k)
        oo[r] = np.sqrt(lhs * fourpoint[r] / (4 * q**2))
    rep = goldstone_bound_check(cov, oo, fourpoint, charge=q, rs=(1, 2, 3))
    assert rep.passed
    assert abs(rep.worst_margin) < 1e-12
    for p in rep.points:
        assert p.margin == pytest.approx(0.0, abs=1e-12)


def test_goldstone_check_order_parameter_rescaling_invariance():
    L = 4
    cov = _psd_cov(L, seed=3)
    rng = np.random.default_rng(5)
    oo = rng.normal(size=L) * 0.1
    fourpoint = np.abs(rng.normal(size=L)) + 0.5
    lam = 3.7
    base = goldstone_bound_check(cov, oo, fourpoint)
    # O -> lam O multiplies the two-point by lam^2 and the four-point by
    # lam^4; the bound itself is invariant
    scaled = goldstone_bound_check(cov, lam**2 * oo, lam**4 * fourpoint)
    for p, ps in zip(base.points, scaled.points):
        assert ps.rhs == pytest.approx(p.rhs, rel=1e-12)
        assert ps.margin == pytest.approx(p.margin, rel=1e-12)
    assert scaled.passed == base.passed


def test_goldstone_check_zero_order_parameter_passes_by_positivity():
    L = 5
    rep = goldstone_bound_check(_psd_cov(L, 1), np.zeros(L), np.ones(L))
    assert rep.passed
    assert all(p.rhs == 0.0 and p.lhs >= 0.0 for p in rep.points)


def test_goldstone_check_skips_nonpositive_normalizer():
    L = 4
    fourpoint = np.array([1.0, 1.0, -0.2, 0.0])
    rep = goldstone_bound_check(_psd_cov(L, 2), 0.1 * np.ones(L), fourpoint)
    skipped = {p.r: p.skipped for p in rep.points}
    assert skipped == {1: False, 2: True, 3: True}
    assert all(p.reason for p in rep.points if p.skipped)
    assert rep.checked == tuple(p for p in rep.points if p.r == 1)


def test_goldstone_check_detects_violation():
    L = 4
    cov = np.zeros((L, L))  # no current response at all
    oo = 0.5 * np.ones(L)
    rep = goldstone_bound_check(cov, oo, np.ones(L))
    assert not rep.passed
    assert rep.worst_margin < -1e-3


def test_goldstone_data_from_exact_state_passes_the_bound():
    model = build_model("chain", L=4, g=1.0, n_flavors=2)
    jj, oo, fourpoint = goldstone_data_from_state(build_exact_state(model))
    # the covariance quadratic form is what positivity rests on
    assert np.max(np.abs(jj - jj.conj().T)) < 1e-12
    assert np.min(np.linalg.eigvalsh(0.5 * (jj + jj.conj().T))) > 0
    assert np.all(fourpoint[1:] > 0)
    rep = goldstone_bound_check(jj, oo, fourpoint, charge=2.0)
    assert rep.passed
    assert rep.worst_margin > 0.1  # comfortably inside, not grazing


def test_goldstone_data_on_ring_uses_every_base_site():
    model = build_model("chain", L=3, boundary="periodic", g=0.6, n_flavors=2)
    st = build_exact_state(model)
    jj, oo, fourpoint = goldstone_data_from_state(st)
    assert jj.shape == (3, 3)
    # ring symmetry: r and L - r profiles coincide
    assert oo[1] == pytest.approx(oo[2], abs=1e-12)
    assert fourpoint[1] == pytest.approx(fourpoint[2], abs=1e-12)
    assert goldstone_bound_check(jj, oo, fourpoint, charge=2.0).passed


def test_raising_bilinear_is_charge_two():
    # <O> vanishes by strong-charge selection; <O Odag> does not
    model = build_model("chain", L=2, g=0.5, n_flavors=2)
    st = build_exact_state(model)
    val = exact_renyi2_correlator(st, raising_bilinear(0, 2), raising_bilinear(1, 2, True))
    assert val.one_point_a == pytest.approx(0.0, abs=1e-12)
    assert val.one_point_b == pytest.approx(0.0, abs=1e-12)
    assert abs(val.full) > 1e-3


def test_bond_current_spec_shape():
    j = bond_current(1, 2, coefficient=0.5)
    assert j.antisymmetrize and j.mu == 0 and j.coefficient == 0.5
    assert j.delta == (1,)


def test_goldstone_check_validation_and_serialization():
    L = 4
    with pytest.raises(ConfigError):
        goldstone_bound_check(_psd_cov(L), np.zeros(L), np.ones(L - 1))
    with pytest.raises(ConfigError, match="outside"):
        goldstone_bound_check(_psd_cov(L), np.zeros(L), np.ones(L), rs=(4,))
    rep = goldstone_bound_check(_psd_cov(L), 0.1 * np.ones(L), np.ones(L))
    blob = json.loads(json.dumps(rep.as_dict()))
    assert blob["passed"] in (True, False)
    assert len(blob["points"]) == 3
