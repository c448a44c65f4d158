import numpy as np
import pytest
from scipy.special import logsumexp

from mfkit import fluctmethods as fm
from mfkit.core import DegenerateError, DomainError, InsufficientRangeError, Series, \
    ValidationError, make_qgrid, make_scales
from mfkit.generators import MrwSpec, gen_binomial, gen_fgn, gen_mrw, oracle_binomial, oracle_mrw
from mfkit.inference import fit_crossover

Q = make_qgrid(-4, 4, 0.5)
N16 = 2 ** 16


@pytest.fixture(scope="module")
def fgn05():
    return gen_fgn(0.5, N16, 3)


@pytest.fixture(scope="module")
def mrw_annealed():
    """Ensemble-averaged K(q, s) of 8 MRW paths; single paths bias high-q exponents low."""
    n = 2 ** 17
    sc = make_scales(n, "dyadic", 1, 2 ** 14)
    q = np.arange(1.0, 6.0)
    L = [fm.structure_function(gen_mrw(MrwSpec(lambda2=0.05, n=n, seed=s)), sc, q).log_F
         for s in range(8)]
    logK = logsumexp(np.array(L), axis=0) - np.log(len(L))
    return fm.FluctuationSurface(logK, q, sc, "K", "mfsf", False)


def _levels(x):
    return Series(np.cumsum(x.values), "levels")


def _slope(s, logF):
    return np.polyfit(np.log(s), logF, 1)[0]


# structure functions and ESS

def test_sf_zero_order_is_one(fgn05):
    surf = fm.structure_function(fgn05, make_scales(N16, "dyadic", 1, 1024), [0.0, 1.0, 2.0])
    assert np.all(surf.log_F[0] == 0.0)


def test_sf_rejects_negative_q(fgn05):
    with pytest.raises(DomainError, match="increments"):
        fm.structure_function(fgn05, [1, 2, 4], [-1.0, 1.0])


def test_sf_brownian_zeta2(fgn05):
    surf = fm.structure_function(fgn05, make_scales(N16, "dyadic", 1, N16 // 16), [2.0])
    spec = fm.fluct_exponents(surf)
    assert spec.tau[0] + 1 == pytest.approx(1.0, abs=0.05)


def test_sf_mrw_matches_oracle(mrw_annealed):
    zeta = fm.fluct_exponents(mrw_annealed, (1, 4096)).tau + 1
    assert np.max(np.abs(zeta - oracle_mrw(0.05, mrw_annealed.qs))) < 0.08


def test_ess_monofractal_and_self(fgn05):
    q = np.array([1.0, 2.0, 3.0, 4.0])
    surf = fm.structure_function(fgn05, make_scales(N16, "dyadic", 1, 2 ** 12), q)
    assert fm.ess(surf, 2.0, 2.0) == pytest.approx(1.0, abs=1e-12)
    for qq in q:
        assert fm.ess(surf, qq, 2.0) == pytest.approx(qq / 2, abs=0.05)


def test_ess_mrw_ratio(mrw_annealed):
    assert fm.ess(mrw_annealed, 4.0, 2.0) == pytest.approx(1.8, abs=0.1)


def test_ess_errors():
    with pytest.raises(DegenerateError):
        fm.structure_function(Series(np.zeros(64), "levels"), [1, 2, 4], [1.0, 2.0])
    flat = np.array([[0.1, 0.2, 0.3], [0.5, 0.5, 0.5]])
    surf = fm.FluctuationSurface(flat, np.array([1.0, 2.0]), np.array([1, 2, 4]), "K")
    with pytest.raises(DegenerateError):
        fm.ess(surf, 1.0, 2.0)
    with pytest.raises(ValidationError):
        fm.ess(surf, 3.0, 2.0)


# exit times

def test_exit_times_ramp():
    ets = fm.exit_times(Series(np.arange(100.0), "levels"), [3.0])
    assert np.all(ets.times[0] == 3)
    # starts 97 and 98 never gain 3
    assert ets.omitted[0] == 2


def test_exit_times_loss_direction():
    ets = fm.exit_times(Series(-np.arange(50.0), "levels"), [2.0], "loss")
    assert np.all(ets.times[0] == 2)
    assert fm.exit_times(Series(-np.arange(50.0), "levels"), [2.0]).omitted[0] == 49


def test_exit_times_match_brute_force():
    X = np.cumsum(np.random.default_rng(1).standard_normal(300))
    ets = fm.exit_times(Series(X, "levels"), [0.7, 2.5])
    for d, t in zip(ets.thresholds, ets.times):
        ref = []
        for i in range(X.size - 1):
            hit = np.flatnonzero(X[i + 1:] - X[i] >= d)
            if hit.size:
                ref.append(hit[0] + 1)
        assert np.array_equal(t, ref)
        assert np.all(t >= 1)


def test_exit_times_errors():
    with pytest.raises(DomainError):
        fm.exit_times(Series(np.arange(5.0), "levels"), [0.0])
    with pytest.raises(ValidationError):
        fm.exit_times(Series(np.arange(5.0), "levels"), [1.0], "up")


def test_brownian_most_probable_exit_gamma(fgn05):
    th = np.geomspace(4, 32, 6)
    ets = fm.exit_times(_levels(fgn05), th)
    res = fm.inverse_sf(ets, [1.0])
    gamma = _slope(th, np.log(res.mode_times))
    assert gamma == pytest.approx(2.0, abs=0.3)
    # T_1 grows with the threshold
    assert np.all(np.diff(res.log_T[0]) > 0)


# MF-FA

def test_mffa_fgn_variance_slope():
    x = gen_fgn(0.7, N16, 5)
    sc = make_scales(N16, "dyadic", 1, 2 ** 12)
    surf = fm.mf_fa(x, sc, [2.0])
    assert _slope(sc, surf.log_F[0]) == pytest.approx(1.4, abs=0.1)


def test_mffa_constant_is_degenerate():
    with pytest.raises(DegenerateError):
        fm.mf_fa(Series(np.full(256, 2.0), "levels"), [1, 2, 4], [2.0])


def test_mffa_binomial_walk_h_decreasing():
    m = gen_binomial(0.3, 14)
    walk = Series(m.values, "increments")
    q = make_qgrid(0.5, 4, 0.5)
    spec = fm.fluct_exponents(fm.mf_fa(walk, make_scales(2 ** 14, "dyadic", 1, 2 ** 10), q))
    assert np.all(np.diff(spec.h) <= 0.01)
    assert spec.h[0] - spec.h[-1] > 0.1


# detrended fluctuation

def test_dfa_fgn_h2(fgn05):
    sc = make_scales(N16, "dyadic", 16, N16 // 8)
    spec = fm.fluct_exponents(fm.detrended_fluctuation(fgn05, sc, [2.0]))
    assert spec.h[0] == pytest.approx(0.5, abs=0.03)


def test_dfa_binomial_tau_oracle():
    m = gen_binomial(0.3, 16)
    sc = make_scales(N16, "dyadic", 8, N16 // 8)
    # DFA-1 carries a small-scale bias on cascades; fit above it
    spec = fm.fluct_exponents(fm.detrended_fluctuation(m, sc, Q), (256, N16 // 8))
    assert np.max(np.abs(spec.tau - oracle_binomial(0.3, Q)[0])) < 0.05


def test_dfa_h_non_increasing_on_cascades():
    for mm in (0.25, 0.35):
        m = gen_binomial(mm, 14)
        sc = make_scales(2 ** 14, "dyadic", 8, 2 ** 11)
        h = fm.fluct_exponents(fm.detrended_fluctuation(m, sc, Q)).h
        assert np.all(np.diff(h) <= 0.01)


def test_dfa_scale_below_minimum():
    with pytest.raises(ValidationError):
        fm.detrended_fluctuation(np.ones(100), [3, 8], [2.0], fm.DetrendConfig("dfa", 2))
    with pytest.raises(ValidationError):
        fm.DetrendConfig("dma", theta=1.5).validate()


def test_dfa_all_zero_boxes_degenerate():
    with pytest.raises(DegenerateError):
        fm.detrended_fluctuation(np.ones(256), [8, 16], [2.0])


def test_dfa_zero_box_flagged_for_negative_q():
    x = np.random.default_rng(0).standard_normal(512)
    x[:16] = 0.0
    cfg = fm.DetrendConfig(covering="single", remove_mean=False)
    surf = fm.detrended_fluctuation(x, [8, 16, 32], [-2.0, 2.0], cfg)
    assert np.all(np.isfinite(surf.log_F))
    assert any("zero box" in f for f in surf.flags)


def test_both_ends_covering_default():
    x = np.random.default_rng(2).standard_normal(1000)
    surf = fm.detrended_fluctuation(x, [16, 64], [2.0])
    assert list(surf.counts) == [2 * (1000 // 16), 2 * (1000 // 64)]
    with pytest.raises(ValidationError):
        fm.detrended_fluctuation(x, [16], [2.0], fm.DetrendConfig(covering="single"))


def test_dma_shift_invariance_centred():
    x = gen_fgn(0.6, 4096, 1).values
    sc = [5, 9, 17, 33, 65]
    cfg = fm.DetrendConfig("dma", theta=0.5)
    a = fm.detrended_fluctuation(x, sc, Q, cfg).log_F
    b = fm.detrended_fluctuation(x + 3.7, sc, Q, cfg).log_F
    assert np.allclose(np.exp(a), np.exp(b), rtol=1e-10)


def test_dfa_shift_invariance():
    x = gen_fgn(0.6, 4096, 1).values
    sc = [8, 16, 32, 64]
    for order in (1, 2):
        cfg = fm.DetrendConfig("dfa", order)
        a = fm.detrended_fluctuation(x, sc, Q, cfg).log_F
        b = fm.detrended_fluctuation(x + 3.7, sc, Q, cfg).log_F
        assert np.allclose(np.exp(a), np.exp(b), rtol=1e-10)


def test_dma_one_sided_constant_trend_crossover():
    n = 2 ** 15
    x = gen_fgn(0.5, n, 8).values
    sc = make_scales(n, "geometric", 4, n // 16, 1.25).scales
    for theta in (0.0, 1.0):
        cfg = fm.DetrendConfig("dma", theta=theta)
        lF = fm.detrended_fluctuation(x, sc, [2.0], cfg).log_F[0]
        H, lb0 = np.polyfit(np.log(sc), lF, 1)
        target = 64.0
        a0 = 2 * np.exp(lb0) / target ** (1 - H)
        lz = fm.detrended_fluctuation(x + a0, sc, [2.0], cfg).log_F[0]
        assert not np.allclose(lz, lF)
        fit = fm.detrended_fluctuation(np.full(n, a0), sc, [2.0], cfg).log_F[0]
        assert np.allclose(np.exp(fit), a0 * (sc - 1) / 2, rtol=1e-8)
        sx_formula = (2 * np.exp(lb0) / a0) ** (1 / (1 - H))
        sx = fit_crossover(sc, np.exp(lz)).s_cross
        assert 0.5 < sx / sx_formula < 2.0


def test_dfa_trend_absorption():
    x = gen_fgn(0.7, 4096, 4).values
    t = np.arange(1, 4097, dtype=float)
    sc = [8, 16, 32, 64, 128]
    for order in (1, 2, 3):
        # a profile trend of degree order-1 is an increment trend of degree order-2
        trend = np.polyval(np.arange(1.0, order + 1), t / 4096) if order > 1 else np.zeros_like(t)
        trend_inc = np.diff(np.concatenate([[0.0], trend]))
        cfg = fm.DetrendConfig("dfa", order)
        a = fm.detrended_fluctuation(x, sc, Q, cfg).log_F
        b = fm.detrended_fluctuation(x + trend_inc, sc, Q, cfg).log_F
        assert np.allclose(np.exp(a), np.exp(b), rtol=1e-9)


def test_superposition_law():
    n = 2 ** 14
    x = gen_fgn(0.3, n, 11).values
    u = gen_fgn(0.8, n, 12).values
    sc = make_scales(n, "dyadic", 16, n // 8)
    F2 = lambda v: np.exp(2 * fm.detrended_fluctuation(v, sc, [2.0]).log_F[0])  # noqa: E731
    fz = F2(x + u)
    assert np.mean(np.abs(fz - F2(x) - F2(u)) / fz) < 0.05


def test_q0_continuity():
    x = gen_fgn(0.5, 2 ** 13, 9)
    sc = make_scales(2 ** 13, "dyadic", 8, 1024)
    L = fm.detrended_fluctuation(x, sc, [-0.01, 0.0, 0.01]).log_F
    F = np.exp(L)
    assert np.all(F[0] <= F[1] * (1 + 1e-12)) and np.all(F[1] <= F[2] * (1 + 1e-12))
    assert np.all(np.abs(F[[0, 2]] / F[1] - 1) < 0.005)


# direct spectrum

def test_direct_spectrum_binomial():
    m = gen_binomial(0.35, 16)
    q = make_qgrid(-3, 3, 0.5)
    sc = make_scales(N16, "dyadic", 8, N16 // 8)
    alpha, f = fm.detrended_direct_spectrum(m, sc, q)
    _, a_or, f_or = oracle_binomial(0.35, q)
    assert np.max(np.abs(alpha - a_or)) < 0.05
    assert np.max(np.abs(f - f_or)) < 0.05
    assert f[q == 0][0] == pytest.approx(1.0, abs=0.05)


def test_direct_spectrum_fgn_flat(fgn05):
    sc = make_scales(N16, "dyadic", 16, N16 // 8)
    alpha, f = fm.detrended_direct_spectrum(fgn05, sc, make_qgrid(-3, 3, 1.0))
    assert np.ptp(alpha) < 0.1
    assert np.max(np.abs(alpha - 0.5)) < 0.05


def test_direct_agrees_with_legendre():
    m = gen_binomial(0.3, 14)
    q = make_qgrid(-2, 2, 0.25)
    sc = make_scales(2 ** 14, "dyadic", 8, 2 ** 11)
    alpha, _ = fm.detrended_direct_spectrum(m, sc, q)
    spec = fm.fluct_exponents(fm.detrended_fluctuation(m, sc, q))
    inner = slice(2, -2)
    assert np.max(np.abs(alpha[inner] - spec.alpha[inner])) < 0.03


# asymmetric

def test_asym_symmetric_fgn():
    sc = make_scales(2 ** 14, "dyadic", 16, 2 ** 11)
    hp, hm = [], []
    for seed in range(20):
        r = fm.asym_detrended(gen_fgn(0.5, 2 ** 14, seed), sc, [2.0])
        hp.append(r.h_plus[0])
        hm.append(r.h_minus[0])
    assert abs(np.mean(hp) - np.mean(hm)) < 0.05


def test_asym_sawtooth_counts():
    # profile rises for 3 boxes of 16 then falls for 1 box, repeated
    seg = np.concatenate([np.full(48, 1.0), np.full(16, -2.0)])
    x = np.tile(seg, 16) + 1e-3 * np.random.default_rng(0).standard_normal(1024)
    r = fm.asym_detrended(x, [16, 32, 64], [2.0], fm.DetrendConfig(covering="single"))
    assert r.n_plus[0] == 48 and r.n_minus[0] == 16


def test_asym_ramp_flags_empty_class():
    x = 1.0 + 0.01 * np.random.default_rng(0).standard_normal(4096)
    r = fm.asym_detrended(x, [16, 64, 256, 1024], [2.0])
    assert r.n_minus[-1] == 0
    assert np.isnan(r.log_F_minus[0, -1])
    assert any("no downward" in f for f in r.flags)


def test_asym_requires_dfa1():
    with pytest.raises(ValidationError):
        fm.asym_detrended(np.ones(64), [8], [2.0], fm.DetrendConfig("dfa", 2))


# local Hurst

def test_local_hurst_exact_power_law():
    sc = make_scales(2 ** 14, "dyadic", 4, 2 ** 12).scales
    surf = fm.FluctuationSurface(np.outer([0.3, 0.7], np.log(sc)) + 1.0, np.array([1.0, 2.0]), sc)
    _, H = fm.local_hurst(surf, 3)
    assert np.allclose(H[0], 0.3) and np.allclose(H[1], 0.7)


def test_local_hurst_two_regimes():
    sc = np.unique(np.round(np.geomspace(8, 8192, 31)).astype(int))
    ls = np.log(sc)
    k = np.log(256.0)
    lf = 0.5 * ls + 0.5 * np.maximum(ls - k, 0)
    surf = fm.FluctuationSurface(lf[None, :], np.array([2.0]), sc)
    w = 5
    c, H = fm.local_hurst(surf, w)
    # pure windows on each side
    lo = c < 256 / (sc[w - 1] / sc[0])
    hi = c > 256 * (sc[w - 1] / sc[0])
    assert np.allclose(H[0, lo], 0.5) and np.allclose(H[0, hi], 1.0)
    # the transition is confined to windows straddling the kink
    mid = (~lo) & (~hi)
    assert np.all((H[0, mid] >= 0.5 - 1e-9) & (H[0, mid] <= 1.0 + 1e-9))


def test_local_hurst_binomial_log_periodic():
    m = gen_binomial(0.3, 14)
    sc = make_scales(2 ** 14, "geometric", 8, 2 ** 11, 1.15)
    _, H = fm.local_hurst(fm.detrended_fluctuation(m, sc, [2.0]), 5)
    assert np.std(H[0]) > 0.01


def test_local_hurst_errors():
    surf = fm.FluctuationSurface(np.zeros((1, 4)), np.array([2.0]), np.array([4, 8, 16, 32]))
    with pytest.raises(InsufficientRangeError):
        fm.local_hurst(surf, 5)
    with pytest.raises(InsufficientRangeError):
        fm.local_hurst(surf, 2)


# wavelet leaders

def test_wl_fgn_zeta2(fgn05):
    spec = fm.fluct_exponents(fm.wavelet_leaders(fgn05, [2.0]))
    assert spec.tau[0] + 1 == pytest.approx(1.0, abs=0.1)


def test_wl_binomial_oracle():
    m = gen_binomial(0.3, 16)
    q = make_qgrid(-2, 4, 0.5)
    # the finest levels carry the largest cascade bias
    spec = fm.fluct_exponents(fm.wavelet_leaders(m, q, (4, 13)))
    assert np.max(np.abs(spec.tau - oracle_binomial(0.3, q)[0])) < 0.08


def test_wl_leaders_dominate_children():
    X = np.cumsum(np.random.default_rng(3).standard_normal(1024))
    d = fm.haar_coefficients(X)
    L = fm.wavelet_leaders_raw(X)
    for j in range(1, len(L)):
        kids = np.abs(d[j - 1][: 2 * L[j].size]).reshape(-1, 2).max(axis=1)
        assert np.all(L[j] >= kids)
        assert np.all(L[j] >= np.abs(d[j]))


def test_wl_truncates_and_needs_levels():
    surf = fm.wavelet_leaders(np.random.default_rng(0).standard_normal(1000), [2.0])
    assert any("truncated" in f for f in surf.flags)
    with pytest.raises(InsufficientRangeError):
        fm.wavelet_leaders(np.ones(32), [2.0])
