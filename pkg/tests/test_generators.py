import numpy as np
import pytest
from scipy import stats

from mfkit import generators as g
from mfkit.boxmethods import ensemble_tau
from mfkit.core import DegenerateError, DomainError, make_qgrid, make_scales
from mfkit.fluctmethods import DetrendConfig, detrended_fluctuation, fluct_exponents, structure_function


def test_binomial_uniform_case():
    m = g.gen_binomial(0.5, 10)
    assert np.allclose(m.values, 2.0 ** -10)
    q = make_qgrid(-3, 3, 0.5)
    tau, alpha, f = g.oracle_binomial(0.5, q)
    assert np.allclose(tau, q - 1)
    assert np.ptp(alpha) < 1e-12


@pytest.mark.parametrize("m", [0.1, 0.3, 0.45])
def test_binomial_oracle_anchor_points(m):
    tau, _, _ = g.oracle_binomial(m, [0.0, 1.0])
    assert tau == pytest.approx([-1.0, 0.0], abs=1e-12)


def test_binomial_alpha_extremes():
    lo, hi = g.binomial_alpha_range(0.3)
    assert lo == pytest.approx(-np.log(0.7) / np.log(2), abs=1e-12)
    assert hi == pytest.approx(-np.log(0.3) / np.log(2), abs=1e-12)
    assert lo == pytest.approx(0.5146, abs=1e-4) and hi == pytest.approx(1.7370, abs=1e-4)
    _, alpha, _ = g.oracle_binomial(0.3, [-60.0, 60.0])
    assert alpha[0] == pytest.approx(hi, abs=1e-6) and alpha[1] == pytest.approx(lo, abs=1e-6)


def test_binomial_domain_and_mass():
    with pytest.raises(DomainError):
        g.gen_binomial(1.2, 4)
    assert g.gen_binomial(0.3, 16).values.sum() == pytest.approx(1.0, abs=1e-12)


def test_stochastic_multinomial_degenerate_row_is_binomial():
    q = make_qgrid(-3, 3, 0.5)
    tau = g.oracle_stochastic_multinomial([[0.3, 0.7]], [1.0], q)
    assert np.allclose(tau, g.oracle_binomial(0.3, q)[0])
    m = g.gen_stochastic_multinomial([[0.3, 0.7]], [1.0], 8, seed=1)
    assert np.allclose(m.values, g.gen_binomial(0.3, 8).values)


def test_stochastic_multinomial_negative_dimensions():
    # rows (0.3, 0.7) w.p. 0.4 and (0.8, 0.2) w.p. 0.6
    q = make_qgrid(-8, 8, 0.25)
    tau = g.oracle_stochastic_multinomial([[0.3, 0.7], [0.8, 0.2]], [0.4, 0.6], q)
    alpha, f = g.oracle_spectrum(q, tau)
    assert f.min() < 0


def test_stochastic_multinomial_annealed_ensemble():
    M, p = [[0.3, 0.7], [0.8, 0.2]], [0.4, 0.6]
    meas = [g.gen_stochastic_multinomial(M, p, 14, seed=s) for s in range(200)]
    q = np.array([1.0, 2.0, 3.0])
    res = ensemble_tau(meas, make_scales(2 ** 14, "dyadic", 1, 2 ** 10), q, mode="annealed")
    oracle = g.oracle_stochastic_multinomial(M, p, q)
    assert res.at(2.0) == pytest.approx(oracle[1], abs=0.05)


def test_stochastic_multinomial_validation_names_row():
    with pytest.raises(DomainError, match="row 1"):
        g.gen_stochastic_multinomial([[0.3, 0.7], [0.5, 0.6]], [0.5, 0.5], 4, seed=0)


def test_lognormal_cascade_oracle():
    sig = 0.3
    mu = g.conservative_mu(sig)
    tau = g.oracle_lognormal_cascade(mu, sig, [0.0, 1.0])
    assert tau == pytest.approx([-1.0, 0.0], abs=1e-12)
    lo, hi = g.lognormal_alpha_range(-0.8, sig)
    assert hi - lo == pytest.approx(1.019, abs=1e-3)
    q = np.linspace(-2, 2, 5)
    assert np.ptp(np.diff(g.oracle_lognormal_cascade(mu, 1e-6, q))) < 1e-9
    with pytest.raises(DomainError):
        g.gen_lognormal_cascade(None, 0.0, 4, 0)


def test_lognormal_cascade_round_trip():
    sig = 0.3
    q = np.array([-1.0, 0.0, 1.0, 2.0, 3.0])
    meas = [g.gen_lognormal_cascade(None, sig, 14, s) for s in range(20)]
    res = ensemble_tau(meas, make_scales(2 ** 14, "dyadic", 1, 2 ** 10), q, mode="annealed")
    oracle = g.oracle_lognormal_cascade(g.conservative_mu(sig), sig, q)
    assert np.max(np.abs(res.tau - oracle)) < 0.1


def test_fgn_white_noise_lag1():
    x = g.gen_fgn(0.5, 2 ** 14, seed=3).values
    r1 = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert abs(r1) < 2 / np.sqrt(x.size)
    assert x.std() == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("H", [0.3, 0.8])
def test_fgn_dfa_round_trip(H):
    x = g.gen_fgn(H, 2 ** 16, seed=11)
    surf = detrended_fluctuation(x, make_scales(2 ** 16, "dyadic", 16, 4096), np.array([2.0]),
                                 DetrendConfig("dfa", 2))
    assert fluct_exponents(surf).h[0] == pytest.approx(H, abs=0.05)


def test_fgn_domain():
    with pytest.raises(DomainError):
        g.gen_fgn(1.0, 16, 0)


def test_mrw_oracle_values():
    assert g.oracle_mrw(0.05, 2.0) == pytest.approx(1.0)
    assert g.oracle_mrw(0.17, 2.0) == pytest.approx(1.0)
    assert g.oracle_mrw(0.05, 4.0) == pytest.approx(1.8)
    assert g.oracle_mrw(1e-9, 3.0) == pytest.approx(1.5, abs=1e-6)


def test_mrw_variance_linear_in_time():
    # the lognormal volatility factor makes 50-path estimates scatter by ~20%,
    # so the zero-mean second moment is pooled over 400 paths
    t = np.array([16, 64, 256, 1024])
    paths = np.array([np.cumsum(g.gen_mrw(g.MrwSpec(0.05, 1.0, 4096, 4096, seed=s)).values)
                      for s in range(400)])
    var = (paths[:, t - 1] ** 2).mean(axis=0)
    slope = np.polyfit(t, var, 1)[0]
    assert slope == pytest.approx(1.0, rel=0.1)
    assert np.all(np.abs(var / t - 1.0) < 0.1)


def test_mrw_warns_when_n_exceeds_T():
    with pytest.warns(UserWarning, match="integral scale"):
        g.gen_mrw(g.MrwSpec(0.05, 1.0, 256, 1024, seed=0))


def test_msm_oracle_values():
    q = np.linspace(-2, 4, 13)
    assert np.allclose(g.oracle_msm_lognormal(1.0, q), q / 2 - 1)
    assert g.oracle_msm_lognormal(1.1, 2.0) == pytest.approx(0.0, abs=1e-12)


def test_msm_binomial_volatility_clustering():
    ac = []
    for s in range(20):
        r = g.gen_msm(g.MsmSpec(kbar=8, law="binomial", m0=1.4, n=8192, seed=s)).values
        a = np.abs(r)
        ac.append(np.corrcoef(a[:-1], a[1:])[0, 1])
    assert np.mean(ac) > 0.05


def test_msm_domain():
    with pytest.raises(DomainError):
        g.gen_msm(g.MsmSpec(law="binomial", m0=2.5))


def test_semf_zero_kernel_is_white_noise():
    x = g.gen_semf(g.SemfSpec(1.0, 0.1, 0.0, 4096, seed=2)).values
    assert abs(stats.kurtosis(x)) < 0.3
    assert x.std() == pytest.approx(1.0, abs=0.05)


def test_semf_heavy_tails():
    k, diverged = [], 0
    for s in range(20):
        try:
            x = g.gen_semf(g.SemfSpec(1.0, 0.1, 0.2, 512, seed=s)).values
        except DegenerateError:
            diverged += 1
            continue
        k.append(stats.kurtosis(x, fisher=False))
    assert diverged < 5
    assert np.mean(k) > 3


def test_semf_divergence_is_reported():
    with pytest.raises(DegenerateError, match="diverged"):
        for s in range(20):
            g.gen_semf(g.SemfSpec(1.0, 0.1, 0.2, 4096, seed=s))


def test_semf_deterministic():
    a = g.gen_semf(g.SemfSpec(n=512, seed=9)).values
    b = g.gen_semf(g.SemfSpec(n=512, seed=9)).values
    assert np.array_equal(a, b)


def test_mmar_uniform_cascade_is_brownian():
    spec = g.CascadeSpec("deterministic_binomial", np.array([0.5]), levels=12)
    X = g.gen_mmar(0.5, spec, 2 ** 14, seed=4)
    assert X.role == "levels"
    surf = structure_function(X, make_scales(2 ** 14, "dyadic", 1, 1024), np.array([1.0, 2.0]))
    zeta = fluct_exponents(surf).tau + 1
    assert zeta == pytest.approx([0.5, 1.0], abs=0.08)


def test_mmar_oracle_composition():
    spec = g.CascadeSpec("deterministic_binomial", np.array([0.3]), levels=10)
    q = np.array([1.0, 2.0, 4.0])
    assert np.allclose(g.oracle_mmar(0.5, spec, q), g.oracle_binomial(0.3, q / 2)[0])
    assert g.oracle_mmar(0.25, spec, [4.0])[0] == pytest.approx(0.0, abs=1e-12)


def test_levy_oracle():
    assert g.oracle_levy(1.5, 1.0) == pytest.approx(-1 / 3)
    assert g.oracle_levy(1.5, 3.0) == 0.0
    q = np.linspace(0.25, 2.0, 8)
    assert np.allclose(g.oracle_levy(2.0, q), q / 2 - 1)


def test_levy_quantiles():
    x = g.gen_levy(1.5, 2 ** 14, seed=1).values
    probs = np.array([0.05, 0.25, 0.5, 0.75, 0.95])
    ref = stats.levy_stable.ppf(probs, 1.5, 0.0)
    assert np.allclose(np.quantile(x, probs), ref, atol=0.06)
    with pytest.raises(DomainError):
        g.gen_levy(2.5, 10, 0)


def test_arfima_pair_independent_and_identical():
    from mfkit.crossmethods import rho_curves
    sc = make_scales(2 ** 13, "dyadic", 16, 512)
    x, y = g.gen_arfima_pair(0.3, 0.3, 0.0, 2 ** 13, seed=1)
    assert np.all(np.abs(rho_curves(x, y, sc).rho) < 0.3)
    x, y = g.gen_arfima_pair(0.3, 0.3, 1.0, 2 ** 13, seed=1)
    assert np.array_equal(x.values, y.values)
    assert np.allclose(rho_curves(x, y, sc).rho, 1.0)


def test_generators_are_deterministic():
    a = g.gen_mrw(g.MrwSpec(0.05, 1.0, 1024, 1024, seed=5)).values
    b = g.gen_mrw(g.MrwSpec(0.05, 1.0, 1024, 1024, seed=5)).values
    assert np.array_equal(a, b)
    assert np.array_equal(g.gen_levy(1.2, 100, 3).values, g.gen_levy(1.2, 100, 3).values)
