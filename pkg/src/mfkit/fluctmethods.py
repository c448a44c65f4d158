"""
Increment- and profile-based estimators.

Structure functions and extended self-similarity, exit times, MF-FA,
the detrended family (MF-DFA, MF-DMA, their canonical-measure variant
and the asymmetric split), local Hurst exponents and wavelet leaders.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (DegenerateError, DomainError, InsufficientRangeError, MfSpectrum, Series,
                   ValidationError, _ols, _scale_array, as_array, build_profile,
                   log_mean_power, loglog_slopes, spectrum_from_tau)


# ---------------------------------------------------------------------------
# configuration and result containers
# ---------------------------------------------------------------------------

@dataclass
class DetrendConfig:
    """Detrending recipe.

    Parameters
    ----------
    method : {"dfa", "dma"}
    order : int
        Polynomial order for DFA (>= 1).
    theta : float
        Window position for DMA: 0 backward, 0.5 centred, 1 forward.
    covering : {"auto", "single", "both_ends"}
        ``auto`` covers from both ends whenever the box size does not
        divide the residual length.
    remove_mean : bool, optional
        Subtract the sample mean of the increments before integrating.
        Defaults to True for DFA (where it is immaterial) and False for
        DMA, whose backward and forward windows are not translation
        invariant: on positive measures the mean-removed profile makes
        the residuals of low-mass boxes cancel, which wrecks q < 0.
    """

    method: str = "dfa"
    order: int = 1
    theta: float = 0.5
    covering: str = "auto"
    remove_mean: Optional[bool] = None

    def __post_init__(self):
        if self.remove_mean is None:
            self.remove_mean = self.method == "dfa"

    def validate(self):
        if self.method == "dfa":
            if int(self.order) != self.order or self.order < 1:
                raise ValidationError("DFA order must be an integer >= 1")
        elif self.method == "dma":
            if not 0.0 <= self.theta <= 1.0:
                raise ValidationError("DMA theta must lie in [0, 1]")
        else:
            raise ValidationError(f"unknown detrending method {self.method!r}")
        if self.covering not in ("auto", "single", "both_ends"):
            raise ValidationError(f"unknown covering {self.covering!r}")
        return self

    def min_scale(self) -> int:
        return self.order + 2 if self.method == "dfa" else 3

    @property
    def tag(self) -> str:
        if self.method == "dfa":
            return f"mfdfa{self.order}"
        return f"mfdma(theta={self.theta:g})"


@dataclass
class FluctuationSurface:
    """ln of a fluctuation function on a (q, s) lattice.

    ``kind`` is "F" for detrended fluctuations (F ~ s^h), "K" for
    structure functions and "Z" for MF-FA (both ~ s^zeta). ``flags``
    collects per-cell diagnostics such as dropped zero boxes.
    """

    log_F: np.ndarray
    qs: np.ndarray
    scales: np.ndarray
    kind: str = "F"
    method: str = ""
    q0_rule: bool = True
    counts: Optional[np.ndarray] = None
    flags: list = field(default_factory=list)


def _as_increments(x) -> np.ndarray:
    if isinstance(x, Series) and x.role == "levels":
        return np.diff(x.values)
    return as_array(x)


def _as_levels(x) -> np.ndarray:
    if isinstance(x, Series) and x.role == "increments":
        return np.concatenate([[0.0], np.cumsum(x.values)])
    if isinstance(x, Series) and x.role == "measure":
        return np.concatenate([[0.0], np.cumsum(x.values)])
    return as_array(x)


# ---------------------------------------------------------------------------
# box residuals shared by the detrended family and cross methods
# ---------------------------------------------------------------------------

def _poly_basis(s: int, order: int) -> np.ndarray:
    t = np.linspace(-1.0, 1.0, s)
    V = np.vander(t, order + 1, increasing=True)
    Q, _ = np.linalg.qr(V)
    return Q


def _boxes(r: np.ndarray, s: int, covering: str) -> np.ndarray:
    """Split a residual-ready sequence into (nbox, s) boxes."""
    n = r.size
    nb = n // s
    if nb < 1:
        raise InsufficientRangeError(f"scale {s} exceeds the series length {n}")
    left = r[: nb * s].reshape(nb, s)
    both = covering == "both_ends" or (covering == "auto" and n % s)
    if both and n % s:
        right = r[n - nb * s:].reshape(nb, s)
        return np.vstack([left, right])
    if covering == "single" and n % s:
        raise ValidationError(f"single covering needs s | N (s={s}, N={n})")
    return left


def _dma_residual(X: np.ndarray, s: int, theta: float) -> np.ndarray:
    """X - moving average over windows with ceil((s-1)(1-theta)) past points.

    Positions lacking a full window are discarded.
    """
    back = int(np.ceil((s - 1) * (1.0 - theta)))
    fwd = s - 1 - back
    C = np.concatenate([[0.0], np.cumsum(X)])
    n = X.size
    i = np.arange(back, n - fwd)
    ma = (C[i + fwd + 1] - C[i - back]) / s
    return X[i] - ma


def box_residuals(profile: np.ndarray, s: int, cfg: DetrendConfig) -> np.ndarray:
    """Detrended residuals of the profile, shaped (nbox, s)."""
    if s < cfg.min_scale():
        raise ValidationError(f"scale {s} below the minimum {cfg.min_scale()} for {cfg.tag}")
    if cfg.method == "dfa":
        B = _boxes(profile, s, cfg.covering)
        Q = _poly_basis(s, cfg.order)
        return B - (B @ Q) @ Q.T
    eps = _dma_residual(profile, s, cfg.theta)
    return _boxes(eps, s, cfg.covering)


def _box_slopes(profile: np.ndarray, s: int, covering: str) -> np.ndarray:
    B = _boxes(profile, s, covering)
    t = np.arange(s) - (s - 1) / 2.0
    return B @ t / np.dot(t, t)


def _moments(logv: np.ndarray, qs: np.ndarray, flags: list, s, label="box"):
    """ln of the q-mean of exp(logv) raised to 1/q; q=0 is the log-average.

    ``logv`` holds ln F_v. Cells with F_v = 0 are dropped for q <= 0.
    """
    out = np.full(qs.size, np.nan)
    finite = np.isfinite(logv)
    if not finite.any():
        return out
    nz = int((~finite).sum())
    for i, q in enumerate(qs):
        if q > 0:
            out[i] = log_mean_power(logv, q) / q
        else:
            if nz:
                flags.append(f"s={int(s)} q={q:g}: {nz} zero {label}(es) excluded")
            lv = logv[finite]
            out[i] = lv.mean() if q == 0 else log_mean_power(lv, q) / q
    return out


# ---------------------------------------------------------------------------
# detrended fluctuation analysis
# ---------------------------------------------------------------------------

def detrended_fluctuation(x, scales, qs, cfg: Optional[DetrendConfig] = None) -> FluctuationSurface:
    """q-order detrended fluctuation F_q(s) of an increment series.

    Parameters
    ----------
    x : Series or array_like
        Increments; the profile is built internally.
    scales : array_like of int
    qs : array_like
        Any real orders. q = 0 uses the log-average of F_v.
    cfg : DetrendConfig, optional
        Defaults to DFA of order 1.

    Returns
    -------
    FluctuationSurface
        ``log_F[i, j] = ln F_{q_i}(s_j)``.
    """
    cfg = (cfg or DetrendConfig()).validate()
    prof = build_profile(_as_increments(x), remove_mean=cfg.remove_mean)
    qs = np.asarray(qs, float)
    scales = _scale_array(scales).astype(int)
    L = np.full((qs.size, scales.size), np.nan)
    counts = np.zeros(scales.size, int)
    flags: list = []
    for j, s in enumerate(scales):
        R = box_residuals(prof, int(s), cfg)
        with np.errstate(divide="ignore"):
            lfv = 0.5 * np.log(np.mean(R * R, axis=1))
        if not np.isfinite(lfv).any():
            raise DegenerateError(f"all boxes have zero fluctuation at s={s}")
        counts[j] = lfv.size
        L[:, j] = _moments(lfv, qs, flags, s)
    return FluctuationSurface(L, qs, scales, "F", cfg.tag, True, counts, flags)


def fluct_exponents(surf: FluctuationSurface, range: Optional[tuple] = None) -> MfSpectrum:
    """Fit the surface and convert to tau(q).

    For ``kind="F"`` the slope is h(q) and tau = q h - 1. For "K", "Z"
    and "M" the slope is zeta(q), tau = zeta - 1 and h = zeta / q.
    """
    slope, _, r2, se = loglog_slopes(surf.scales, surf.log_F, range)
    q = surf.qs
    if surf.kind == "F":
        h = slope
        tau = q * h - 1.0
    else:
        tau = slope - 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(q != 0, slope / q, np.nan)
    rng_used = range or (int(surf.scales[0]), int(surf.scales[-1]))
    return spectrum_from_tau(q, tau, h=h, method=surf.method, r_squared=r2, stderr=se,
                             fit_range=rng_used)


def detrended_direct_spectrum(x, scales, qs, cfg: Optional[DetrendConfig] = None,
                              range: Optional[tuple] = None):
    """alpha(q) and f(q) from the canonical measure mu_v = F_v^q / sum F_v^q.

    Returns
    -------
    (alpha, f) : tuple of numpy.ndarray
    """
    cfg = (cfg or DetrendConfig()).validate()
    prof = build_profile(_as_increments(x), remove_mean=cfg.remove_mean)
    qs = np.asarray(qs, float)
    scales = _scale_array(scales).astype(int)
    A = np.empty((qs.size, scales.size))
    Fm = np.empty_like(A)
    for j, s in enumerate(scales):
        R = box_residuals(prof, int(s), cfg)
        with np.errstate(divide="ignore"):
            lfv = 0.5 * np.log(np.mean(R * R, axis=1))
        lfv = lfv[np.isfinite(lfv)]
        if lfv.size == 0:
            raise DegenerateError(f"all boxes have zero fluctuation at s={s}")
        for i, q in enumerate(qs):
            a = q * lfv
            a = a - a.max()
            w = np.exp(a)
            z = w.sum()
            mu = w / z
            A[i, j] = np.dot(mu, lfv)
            Fm[i, j] = np.dot(mu, a - np.log(z))
    # the canonical sums are already logs, so regress them on ln s
    alpha = loglog_slopes(scales, A, range)[0]
    f = loglog_slopes(scales, Fm, range)[0]
    return alpha, f


@dataclass
class AsymmetricResult:
    qs: np.ndarray
    scales: np.ndarray
    log_F_plus: np.ndarray
    log_F_minus: np.ndarray
    n_plus: np.ndarray
    n_minus: np.ndarray
    h_plus: np.ndarray
    h_minus: np.ndarray
    flags: list


def asym_detrended(x, scales, qs, cfg: Optional[DetrendConfig] = None,
                   range: Optional[tuple] = None) -> AsymmetricResult:
    """Upward and downward fluctuation functions split by the local trend slope.

    The slope sign of each box comes from a linear fit to the raw
    (not mean-removed) cumulative sum, so that a rising price path
    produces rising boxes. F_v is the r.m.s. of DFA-1 residuals.
    """
    cfg = cfg or DetrendConfig("dfa", 1)
    if cfg.method != "dfa" or cfg.order != 1:
        raise ValidationError("asymmetric analysis is defined for DFA-1 only")
    cfg.validate()
    inc = _as_increments(x)
    prof = build_profile(inc, remove_mean=cfg.remove_mean)
    raw = build_profile(inc, remove_mean=False)
    qs = np.asarray(qs, float)
    scales = _scale_array(scales).astype(int)
    Lp = np.full((qs.size, scales.size), np.nan)
    Lm = np.full_like(Lp, np.nan)
    npl = np.zeros(scales.size, int)
    nmi = np.zeros(scales.size, int)
    flags: list = []
    for j, s in enumerate(scales):
        R = box_residuals(prof, int(s), cfg)
        with np.errstate(divide="ignore"):
            lfv = 0.5 * np.log(np.mean(R * R, axis=1))
        up = _box_slopes(raw, int(s), cfg.covering) >= 0
        npl[j], nmi[j] = up.sum(), (~up).sum()
        for mask, dest, name in ((up, Lp, "upward"), (~up, Lm, "downward")):
            if mask.any():
                dest[:, j] = _moments(lfv[mask], qs, flags, s)
            else:
                flags.append(f"s={int(s)}: no {name} boxes")
    hp = _safe_slopes(scales, Lp, range)
    hm = _safe_slopes(scales, Lm, range)
    return AsymmetricResult(qs, scales, Lp, Lm, npl, nmi, hp, hm, flags)


def _safe_slopes(scales, L, range):
    try:
        return loglog_slopes(scales, L, range)[0]
    except InsufficientRangeError:
        return np.full(L.shape[0], np.nan)


def local_hurst(surf: FluctuationSurface, window: int = 5, step: int = 1):
    """Slopes of ln F against ln s in sliding windows of ``window`` scales.

    Returns
    -------
    centers : numpy.ndarray
        Geometric centre scale of each window.
    H : numpy.ndarray
        Shape (nq, nwindows).
    """
    if window < 3:
        raise InsufficientRangeError("a window needs at least 3 scales")
    ns = surf.scales.size
    if ns < window:
        raise InsufficientRangeError(f"{ns} scales cannot hold a window of {window}")
    starts = np.arange(0, ns - window + 1, step)
    ls = np.log(surf.scales.astype(float))
    H = np.empty((surf.qs.size, starts.size))
    for k, a in enumerate(starts):
        H[:, k] = loglog_slopes(surf.scales[a:a + window], surf.log_F[:, a:a + window])[0]
    centers = np.exp(np.array([ls[a:a + window].mean() for a in starts]))
    return centers, H


# ---------------------------------------------------------------------------
# structure functions, MF-FA, ESS
# ---------------------------------------------------------------------------

def structure_function(x, scales, qs) -> FluctuationSurface:
    """K(q, s) = <|X(i) - X(i-s)|^q> / <|X|^q> for q >= 0.

    An increment Series is integrated first; plain arrays are read as
    levels. The denominator is constant in s and does not affect the
    exponents.
    """
    qs = np.asarray(qs, float)
    if np.any(qs < 0):
        raise DomainError("structure functions need q >= 0: increments can vanish")
    X = _as_levels(x)
    scales = _scale_array(scales).astype(int)
    if scales.max() >= X.size:
        raise InsufficientRangeError("largest scale must be below the series length")
    if not np.any(X):
        raise DegenerateError("identically zero path: K(q, s) is undefined")
    with np.errstate(divide="ignore"):
        la = np.log(np.abs(X))
    L = np.empty((qs.size, scales.size))
    flags: list = []
    for j, s in enumerate(scales):
        with np.errstate(divide="ignore"):
            ld = np.log(np.abs(X[s:] - X[:-s]))
        for i, q in enumerate(qs):
            if q == 0:
                L[i, j] = 0.0
                continue
            L[i, j] = log_mean_power(ld, q) - log_mean_power(la, q)
    return FluctuationSurface(L, qs, scales, "K", "mfsf", False, None, flags)


def mf_fa(x, scales, qs) -> FluctuationSurface:
    """Z(q, s) = <|dX(i,s) - <dX(i,s)>|^q> for any real q.

    Zero deviations are dropped for q <= 0 and flagged.
    """
    X = _as_levels(x)
    qs = np.asarray(qs, float)
    scales = _scale_array(scales).astype(int)
    if scales.max() >= X.size:
        raise InsufficientRangeError("largest scale must be below the series length")
    L = np.empty((qs.size, scales.size))
    flags: list = []
    for j, s in enumerate(scales):
        d = X[s:] - X[:-s]
        d = d - d.mean()
        with np.errstate(divide="ignore"):
            ld = np.log(np.abs(d))
        if not np.isfinite(ld).any():
            raise DegenerateError(f"all increments vanish at s={s}")
        for i, q in enumerate(qs):
            if q == 0:
                L[i, j] = 0.0
                continue
            if q < 0:
                bad = ~np.isfinite(ld)
                if bad.any():
                    flags.append(f"s={int(s)} q={q:g}: {int(bad.sum())} zero increments excluded")
                L[i, j] = log_mean_power(ld[~bad], q)
            else:
                L[i, j] = log_mean_power(ld, q)
    return FluctuationSurface(L, qs, scales, "Z", "mffa", False, None, flags)


def ess(surf: FluctuationSurface, q: float, q0: float = 2.0) -> float:
    """Relative exponent xi(q, q0): slope of ln K(q, s) against ln K(q0, s)."""
    iq = np.flatnonzero(np.isclose(surf.qs, q))
    i0 = np.flatnonzero(np.isclose(surf.qs, q0))
    if iq.size == 0 or i0.size == 0:
        raise ValidationError("q and q0 must be on the surface grid")
    x = surf.log_F[i0[0]]
    y = surf.log_F[iq[0]]
    if not np.all(np.isfinite(x)) or np.ptp(x) == 0:
        raise DegenerateError(f"K({q0:g}, s) is degenerate")
    return _ols(x, y)[0]


# ---------------------------------------------------------------------------
# exit times
# ---------------------------------------------------------------------------

@dataclass
class ExitTimeSet:
    thresholds: np.ndarray
    times: list
    direction: str
    omitted: np.ndarray


def _sparse_table(X: np.ndarray, op):
    tab = [X]
    k = 1
    while 2 * k <= X.size:
        prev = tab[-1]
        tab.append(op(prev[:-k], prev[k:]))
        k *= 2
    return tab


def exit_times(x, thresholds, direction: str = "gain") -> ExitTimeSet:
    """Minimal waiting time for the path to move by a threshold.

    ``s(i, dX) = min{t >= 1 : X(i+t) - X(i) >= dX}`` for gains and
    ``<= -dX`` for losses. Starting points from which the threshold is
    never reached are omitted and counted.
    """
    if direction not in ("gain", "loss"):
        raise ValidationError("direction must be 'gain' or 'loss'")
    th = np.asarray(thresholds, float)
    if np.any(th <= 0):
        raise DomainError("thresholds must be positive")
    X = _as_levels(x)
    if direction == "loss":
        X = -X
    n = X.size
    tab = _sparse_table(X, np.maximum)
    times, omitted = [], np.zeros(th.size, int)
    start = np.arange(n - 1)
    for t_i, d in enumerate(th):
        target = X[start] + d
        pos = start + 1
        # binary lifting: skip blocks whose running max stays below target
        for k in range(len(tab) - 1, -1, -1):
            span = 1 << k
            ok = pos + span - 1 < n
            idx = np.where(ok, pos, 0)
            adv = ok & (tab[k][np.minimum(idx, tab[k].size - 1)] < target)
            pos = np.where(adv, pos + span, pos)
        hit = pos < n
        hit[hit] = X[pos[hit]] >= target[hit]
        times.append((pos - start)[hit])
        omitted[t_i] = int((~hit).sum())
    return ExitTimeSet(th, times, direction, omitted)


@dataclass
class InverseSFResult:
    ps: np.ndarray
    log_T: np.ndarray
    phi: np.ndarray
    r_squared: np.ndarray
    mode_times: np.ndarray


def most_probable_exit(times: np.ndarray, grid: int = 256) -> float:
    """Mode of the exit-time distribution, located by a kernel density on ln s."""
    from scipy.stats import gaussian_kde

    t = np.asarray(times, float)
    if np.unique(t).size < 2:
        return float(t[0])
    lt = np.log(t)
    kde = gaussian_kde(lt)
    g = np.linspace(lt.min(), lt.max(), grid)
    # density of s is density of ln s divided by s
    return float(np.exp(g[np.argmax(kde(g) * np.exp(-g))]))


def inverse_sf(ets: ExitTimeSet, ps) -> InverseSFResult:
    """Distance structure functions T_p(dX) = <s^p> and exponents phi(p)."""
    ps = np.asarray(ps, float)
    logT = np.array([[log_mean_power(np.log(t.astype(float)), p) for t in ets.times] for p in ps])
    phi, _, r2, _ = loglog_slopes(ets.thresholds, logT)
    mode = np.array([most_probable_exit(t) for t in ets.times])
    return InverseSFResult(ps, logT, phi, r2, mode)


# ---------------------------------------------------------------------------
# wavelet leaders
# ---------------------------------------------------------------------------

def haar_coefficients(X: np.ndarray) -> list:
    """L1-normalized Haar detail coefficients of a path, finest level first.

    Level j (1-based) has ``n / 2^j`` coefficients
    ``(sum of right half - sum of left half) / 2^j`` over dyadic blocks.
    """
    out = []
    a = X.astype(float)
    while a.size >= 2:
        a = a[: a.size // 2 * 2]
        even, odd = a[0::2], a[1::2]
        out.append((odd - even) / 2.0)
        a = (odd + even) / 2.0
    return out


def wavelet_leaders_raw(X: np.ndarray) -> list:
    """Leaders per level: sup of |d| over the 3-neighbourhood and all finer scales."""
    coeffs = haar_coefficients(X)
    leaders = []
    sup = None
    for d in coeffs:
        cur = np.abs(d)
        if sup is not None:
            m = sup[: 2 * cur.size].reshape(-1, 2).max(axis=1)
            cur = np.maximum(cur, m)
        sup = cur
        pad = np.concatenate([[0.0], cur, [0.0]])
        leaders.append(np.maximum(np.maximum(pad[:-2], pad[1:-1]), pad[2:]))
    return leaders


def wavelet_leaders(x, qs, jrange: Optional[tuple] = None) -> FluctuationSurface:
    """Moments M(q, j) of Haar wavelet leaders, scaling as 2^{j zeta(q)}.

    The increments are cumulated without mean removal. Series whose
    length is not a power of two are truncated (flagged).
    """
    inc = _as_increments(x)
    n = inc.size
    p2 = 1 << int(np.floor(np.log2(n)))
    flags = []
    if p2 != n:
        flags.append(f"truncated from {n} to {p2} samples")
        inc = inc[:p2]
    J = int(np.log2(p2))
    lo, hi = jrange or (2, J - 3)
    if hi - lo + 1 < 4:
        raise InsufficientRangeError(f"only {max(0, hi - lo + 1)} usable dyadic levels")
    X = np.cumsum(inc)
    leaders = wavelet_leaders_raw(X)
    qs = np.asarray(qs, float)
    js = np.arange(lo, hi + 1)
    L = np.empty((qs.size, js.size))
    for k, j in enumerate(js):
        lv = leaders[j - 1]
        with np.errstate(divide="ignore"):
            ll = np.log(lv)
        good = np.isfinite(ll)
        if not good.all():
            flags.append(f"j={j}: {int((~good).sum())} zero leaders excluded")
        ll = ll[good]
        for i, q in enumerate(qs):
            L[i, k] = log_mean_power(ll, q)
    return FluctuationSurface(L, qs, (2 ** js).astype(int), "M", "wl", False, None, flags)
