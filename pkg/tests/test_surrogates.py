import numpy as np
import pytest
from scipy import stats

from mfkit import surrogates as sg
from mfkit.core import ValidationError, DomainError, Series, make_qgrid, make_scales, rng_for
from mfkit.fluctmethods import detrended_fluctuation, fluct_exponents
from mfkit.generators import gen_binomial, gen_fgn


@pytest.fixture(scope="module")
def fgn08():
    return gen_fgn(0.8, 2 ** 14, 1)


def _lag1(v):
    v = v - v.mean()
    return np.dot(v[:-1], v[1:]) / np.dot(v, v)


def _power(v):
    return np.abs(np.fft.rfft(v)) ** 2


# shuffle

def test_shuffle_multiset_and_determinism(fgn08):
    a = sg.shuffle(fgn08, 4)
    assert np.array_equal(np.sort(a.values), np.sort(fgn08.values))
    assert np.array_equal(a.values, sg.shuffle(fgn08, 4).values)
    assert not np.array_equal(a.values, sg.shuffle(fgn08, 5).values)


def test_shuffle_destroys_correlation():
    x = gen_fgn(0.9, 2 ** 14, 2)
    assert _lag1(x.values) > 0.5
    # 2/sqrt(n) is a 95% band, so check its coverage over many shuffles
    r = np.array([_lag1(sg.shuffle(x, s).values) for s in range(100)])
    assert np.mean(np.abs(r) < 2 / np.sqrt(x.values.size)) >= 0.9
    assert abs(r.mean()) < 2 / np.sqrt(100 * x.values.size)


def test_shuffle_too_short():
    with pytest.raises(ValidationError):
        sg.shuffle(np.ones(1), 0)


# phase randomisation

@pytest.mark.parametrize("n", [1024, 1023])
def test_ft_phase_keeps_periodogram(n):
    x = gen_fgn(0.7, n, 3).values
    y = sg.ft_phase(x, 8).values
    assert y.size == n and np.isrealobj(y)
    p0, p1 = _power(x), _power(y)
    assert np.max(np.abs(p1 - p0)) / np.max(p0) < 1e-9
    assert np.allclose(p1[1:], p0[1:], rtol=1e-9, atol=1e-9 * p0.max())


def test_ft_phase_gaussianizes():
    x = rng_for(0).exponential(size=2 ** 14)
    assert stats.skew(x) > 1.5
    assert abs(stats.skew(sg.ft_phase(x, 1).values)) < 0.2


def test_ft_phase_identity():
    x = gen_fgn(0.7, 512, 3).values
    assert np.allclose(sg.ft_phase(x, 8, phase_scale=0.0).values, x, atol=1e-12)


# AAFT and IAAFT

def test_aaft_multiset():
    x = rng_for(1).standard_t(4, 2048)
    assert np.array_equal(np.sort(sg.aaft(x, 2).values), np.sort(x))


def test_iaaft_multiset_and_spectrum(fgn08):
    s = sg.iaaft(fgn08, 7, max_iter=200)
    assert np.array_equal(np.sort(s.values), np.sort(fgn08.values))
    assert s.meta["iterations"] <= 200
    amp = np.abs(np.fft.rfft(fgn08.values))
    err = sg.periodogram_error(s.values, amp)
    assert err == pytest.approx(s.meta["spectral_error"])
    assert err < 0.01


def test_iaaft_error_non_increasing(fgn08):
    errs = np.array(sg.iaaft(fgn08, 3, max_iter=100).meta["errors"])
    assert errs.size > 2
    assert np.all(np.diff(errs) <= 0)


def test_iaaft_flags_non_convergence(fgn08):
    s = sg.iaaft(fgn08, 3, max_iter=2)
    assert not s.meta["converged"] and s.meta["iterations"] == 2


def test_iaaft_removes_nonlinear_multifractality():
    m = gen_binomial(0.3, 13).values
    walk = m * rng_for(0, 77).choice([-1.0, 1.0], m.size)
    q = make_qgrid(-4, 4, 1.0)
    sc = make_scales(m.size, "dyadic", 16, m.size // 8)
    width = lambda v: fluct_exponents(detrended_fluctuation(v, sc, q)).widths["delta_alpha"]  # noqa: E731
    assert width(sg.iaaft(walk, 1, max_iter=100).values) < width(walk)


def test_iaaft_parameter_validation():
    with pytest.raises(ValidationError):
        sg.SurrogateMethod("iaaft", {"max_iter": 0}).validate()
    with pytest.raises(ValidationError):
        sg.SurrogateMethod("iaaft", {"tol": 0.0}).validate()
    with pytest.raises(ValidationError):
        sg.SurrogateMethod("bootstrap").validate()
    with pytest.raises(ValidationError):
        sg.iaaft(np.arange(5.0), 0)


# rank remapping

def test_rank_remap_gaussian_round_trip():
    x = rng_for(2).standard_normal(4096)
    y = sg.rank_remap(x, 5, "gaussian").values
    assert np.array_equal(np.argsort(y), np.argsort(x))
    assert np.corrcoef(np.sort(x), np.sort(y))[0, 1] > 0.999
    assert y.std() == pytest.approx(x.std(), rel=1e-12)
    assert y.mean() == pytest.approx(x.mean(), abs=1e-12)


def test_rank_remap_student_heavier():
    x = gen_fgn(0.6, 2 ** 14, 4)
    g = sg.rank_remap(x, 1, "gaussian").values
    t = sg.rank_remap(x, 1, "student", gamma=3.0).values
    assert np.array_equal(np.argsort(t), np.argsort(x.values))
    assert stats.kurtosis(t) > stats.kurtosis(g) + 1.0


def test_rank_remap_weibull_and_errors():
    x = rng_for(3).standard_normal(1024)
    w = sg.rank_remap(x, 0, "weibull", beta=0.7)
    assert "flag" in w.meta
    assert np.array_equal(np.argsort(w.values), np.argsort(x))
    with pytest.raises(DomainError):
        sg.rank_remap(x, 0, "weibull", beta=-1.0)
    with pytest.raises(DomainError):
        sg.rank_remap(x, 0, "student", gamma=0.0)
    with pytest.raises(ValidationError):
        sg.rank_remap(x, 0, "cauchy")


# ensembles

def test_ensemble_distinct_and_reproducible():
    x = gen_fgn(0.5, 256, 0)
    ens = sg.make_ensemble(x, "shuffle", 100, 40)
    assert ens.count == 100 and ens.seeds == list(range(40, 140))
    rows = {tuple(r.values) for r in ens.replicates}
    assert len(rows) == 100
    again = sg.make_ensemble(x, "shuffle", 100, 40)
    assert all(np.array_equal(a.values, b.values) for a, b in zip(ens.replicates, again.replicates))


def test_ensemble_singleton_and_lengths():
    x = Series(gen_fgn(0.5, 300, 0).values, "increments")
    for kind in sg.KINDS:
        ens = sg.make_ensemble(x, kind, 1, 0)
        assert ens.count == 1
        assert ens.replicates[0].values.size == 300
    with pytest.raises(ValidationError):
        sg.make_ensemble(x, "shuffle", 0, 0)
