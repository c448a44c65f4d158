"""
Joint multifractal estimators for pairs of series.

Joint partition functions of two measures (with the binomial-pair
oracle), joint structure functions, MF-DCCA, its signed MF-CCA variant,
the partial MF-DPXA and the DCCA-type correlation coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .boxmethods import box_masses
from .core import (DegenerateError, DomainError, MfSpectrum,
                   ValidationError, _scale_array, as_measure, build_profile,
                   log_mean_power, loglog_slopes, spectrum_from_tau)
from .fluctmethods import (DetrendConfig, _as_increments, _as_levels, _boxes, _moments,
                           _poly_basis, box_residuals)


def _check_pair(x, y):
    if len(np.asarray(x)) != len(np.asarray(y)):
        raise ValidationError(f"series lengths differ: {len(np.asarray(x))} vs {len(np.asarray(y))}")


# ---------------------------------------------------------------------------
# joint partition function
# ---------------------------------------------------------------------------

@dataclass
class JointSpectrum:
    """Joint exponents over a (p, q) grid.

    ``tau_xy[i, j]`` belongs to ``(ps[i], qs[j])``. ``alpha_x``,
    ``alpha_y`` and ``f_xy`` come from the canonical joint measure.
    """

    ps: np.ndarray
    qs: np.ndarray
    tau_xy: np.ndarray
    alpha_x: np.ndarray
    alpha_y: np.ndarray
    f_xy: np.ndarray
    log_chi: Optional[np.ndarray] = None
    scales: Optional[np.ndarray] = None


def mfx_pf(mx, my, ps, qs, scales, covering: str = "divisors",
           range: Optional[tuple] = None) -> JointSpectrum:
    """Joint partition function chi_xy(p, q, s) = sum m_x^{p/2} m_y^{q/2}.

    Boxes where either measure vanishes are dropped whenever the
    corresponding exponent is non-positive.
    """
    _check_pair(mx, my)
    ax, ay = as_measure(mx), as_measure(my)
    ps = np.atleast_1d(np.asarray(ps, float))
    qs = np.atleast_1d(np.asarray(qs, float))
    scales = _scale_array(scales).astype(int)
    shape = (ps.size, qs.size, scales.size)
    L = np.empty(shape)
    AX = np.empty(shape)
    AY = np.empty(shape)
    FF = np.empty(shape)
    for k, s in enumerate(scales):
        bx = box_masses(ax, int(s), covering)
        by = box_masses(ay, int(s), covering)
        with np.errstate(divide="ignore"):
            lx, ly = np.log(bx), np.log(by)
        for i, p in enumerate(ps):
            for j, q in enumerate(qs):
                keep = (np.isfinite(lx) | (p > 0)) & (np.isfinite(ly) | (q > 0))
                keep &= np.isfinite(lx) & np.isfinite(ly)
                a = 0.5 * p * lx[keep] + 0.5 * q * ly[keep]
                mxa = a.max()
                w = np.exp(a - mxa)
                z = w.sum()
                L[i, j, k] = mxa + np.log(z)
                mu = w / z
                AX[i, j, k] = np.dot(mu, lx[keep])
                AY[i, j, k] = np.dot(mu, ly[keep])
                FF[i, j, k] = np.dot(mu, a - mxa - np.log(z))

    def fit(T):
        flat = T.reshape(-1, scales.size)
        return loglog_slopes(scales, flat, range)[0].reshape(ps.size, qs.size)

    return JointSpectrum(ps, qs, fit(L), fit(AX), fit(AY), fit(FF), L, scales)


def oracle_mfx_binomial(px: float, py: float, p, q):
    """Joint mass exponents of two position-aligned binomial measures.

    ``tau_xy = p gamma / (2 ln 2) - ln[py^Q + (1-py)^Q] / ln 2`` with
    ``Q = beta p / 2 + q / 2``,
    ``beta = ln(px/(1-px)) / ln(py/(1-py))`` and
    ``gamma = beta ln(1-py) - ln(1-px)``.
    """
    for v in (px, py):
        if not 0 < v < 1:
            raise DomainError("binomial parameters must lie in (0, 1)")
    if np.isclose(py, 0.5):
        raise DomainError("py = 1/2 makes beta undefined")
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    beta = np.log(px / (1 - px)) / np.log(py / (1 - py))
    gamma = beta * np.log(1 - py) - np.log(1 - px)
    Q = beta * p / 2 + q / 2
    tau = p * gamma / (2 * np.log(2)) - np.logaddexp(Q * np.log(py), Q * np.log(1 - py)) / np.log(2)
    return tau, beta, gamma


# ---------------------------------------------------------------------------
# joint structure function
# ---------------------------------------------------------------------------

@dataclass
class JointScaling:
    """Cross exponents with the per-cell surface."""

    qs: np.ndarray
    scales: np.ndarray
    log_F: np.ndarray
    h_xy: np.ndarray
    tau_xy: np.ndarray
    r_squared: np.ndarray
    method: str = ""
    flags: list = field(default_factory=list)
    signs: Optional[np.ndarray] = None
    scaling: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None

    def spectrum(self) -> MfSpectrum:
        return spectrum_from_tau(self.qs, self.tau_xy, h=self.h_xy, method=self.method,
                                 r_squared=self.r_squared)


def mfx_sf(x, y, qs, scales, range: Optional[tuple] = None) -> JointScaling:
    """Joint structure function K_xy(q, s) = <|dX dY|^{q/2}>, q >= 0."""
    _check_pair(x, y)
    qs = np.asarray(qs, float)
    if np.any(qs < 0):
        raise DomainError("joint structure functions need q >= 0: products can vanish")
    X, Y = _as_levels(x), _as_levels(y)
    scales = _scale_array(scales).astype(int)
    L = np.empty((qs.size, scales.size))
    for k, s in enumerate(scales):
        with np.errstate(divide="ignore"):
            lp = 0.5 * np.log(np.abs((X[s:] - X[:-s]) * (Y[s:] - Y[:-s])))
        for i, q in enumerate(qs):
            L[i, k] = 0.0 if q == 0 else log_mean_power(lp, q)
    zeta, _, r2, _ = loglog_slopes(scales, L, range)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(qs != 0, zeta / qs, np.nan)
    return JointScaling(qs, scales, L, h, zeta - 1.0, r2, "mfxsf")


# ---------------------------------------------------------------------------
# detrended cross-correlation family
# ---------------------------------------------------------------------------

def _profiles(x, y, cfg):
    px = build_profile(_as_increments(x), remove_mean=cfg.remove_mean)
    py = build_profile(_as_increments(y), remove_mean=cfg.remove_mean)
    return px, py


def _box_covariances(px, py, s, cfg):
    Rx = box_residuals(px, s, cfg)
    Ry = box_residuals(py, s, cfg)
    return np.mean(Rx * Ry, axis=1), np.mean(Rx * Rx, axis=1), np.mean(Ry * Ry, axis=1)


def mf_dcca(x, y, scales, qs, cfg: Optional[DetrendConfig] = None,
            range: Optional[tuple] = None) -> JointScaling:
    """MF-DCCA: F_xy(q, s) = {<|F_v^2|^{q/2}>}^{1/q} ~ s^{h_xy(q)}.

    With x = y this is exactly MF-DFA (or MF-DMA) of x.
    """
    _check_pair(x, y)
    cfg = (cfg or DetrendConfig()).validate()
    px, py = _profiles(x, y, cfg)
    qs = np.asarray(qs, float)
    scales = _scale_array(scales).astype(int)
    L = np.full((qs.size, scales.size), np.nan)
    flags: list = []
    for k, s in enumerate(scales):
        f2, _, _ = _box_covariances(px, py, int(s), cfg)
        with np.errstate(divide="ignore"):
            lfv = 0.5 * np.log(np.abs(f2))
        if not np.isfinite(lfv).any():
            raise DegenerateError(f"all cross fluctuations vanish at s={s}")
        L[:, k] = _moments(lfv, qs, flags, s)
    h, _, r2, _ = loglog_slopes(scales, L, range)
    return JointScaling(qs, scales, L, h, qs * h - 1.0, r2, "mfdcca-" + cfg.tag, flags)


def mf_cca(x, y, scales, qs, cfg: Optional[DetrendConfig] = None,
           range: Optional[tuple] = None) -> JointScaling:
    """Signed MF-CCA.

    ``F_xy^q = <sign(F_v^2) |F_v^2|^{q/2}>``; for q = 0 the signed
    log-average ``sum sign ln|F_v| / sum sign`` is used. A q row whose
    F_xy is negative at every scale is fitted on -F_xy and reported with
    sign -1; a row with mixed signs gets a no-scaling verdict (NaN
    exponent, ``scaling=False``).
    """
    _check_pair(x, y)
    cfg = (cfg or DetrendConfig()).validate()
    px, py = _profiles(x, y, cfg)
    qs = np.asarray(qs, float)
    scales = _scale_array(scales).astype(int)
    V = np.full((qs.size, scales.size), np.nan)  # signed F_xy^q (or signed log for q=0)
    for k, s in enumerate(scales):
        f2, _, _ = _box_covariances(px, py, int(s), cfg)
        sg = np.sign(f2)
        with np.errstate(divide="ignore"):
            lf = 0.5 * np.log(np.abs(f2))
        ok = np.isfinite(lf)
        for i, q in enumerate(qs):
            if q == 0:
                den = sg[ok].sum()
                V[i, k] = np.nan if den == 0 else np.dot(sg[ok], lf[ok]) / den
            else:
                a = q * lf[ok]
                m = a.max()
                V[i, k] = np.exp(m) * np.mean(sg[ok] * np.exp(a - m)) if q > 0 else \
                    np.mean(sg[ok] * np.exp(a))
    L = np.full_like(V, np.nan)
    signs = np.zeros(qs.size)
    scaling = np.zeros(qs.size, bool)
    for i, q in enumerate(qs):
        row = V[i]
        if q == 0:
            # the signed log-average is already ln F_xy
            if np.all(np.isfinite(row)):
                L[i], signs[i], scaling[i] = row, 1.0, True
            continue
        if np.all(row > 0):
            signs[i] = 1.0
        elif np.all(row < 0):
            signs[i] = -1.0
        else:
            continue
        L[i] = np.log(np.abs(row)) / q
        scaling[i] = True
    h = np.full(qs.size, np.nan)
    r2 = np.full(qs.size, np.nan)
    if scaling.any():
        h[scaling], _, r2[scaling], _ = loglog_slopes(scales, L[scaling], range)
    return JointScaling(qs, scales, L, h, qs * h - 1.0, r2, "mfcca-" + cfg.tag, [],
                        signs, scaling)


def _window_residual_profiles(x, Z, s, covering, intercept):
    """Boxes of residual profiles after regressing increments on drivers."""
    B = _boxes(x, s, covering)
    nb = B.shape[0]
    cols = [] if Z is None else [_boxes(z, s, covering) for z in Z]
    if intercept:
        cols.append(np.ones_like(B))
    if not cols:
        return np.cumsum(B, axis=1), np.ones(nb, bool)
    A = np.stack(cols, axis=2)  # (nb, s, k)
    ok = np.linalg.matrix_rank(A) == A.shape[2]
    beta = np.einsum("vks,vs->vk", np.linalg.pinv(A), B)
    r = B - np.einsum("vsk,vk->vs", A, beta)
    return np.cumsum(r, axis=1), ok


def mf_dpxa(x, y, Z, scales, qs, cfg: Optional[DetrendConfig] = None,
            range: Optional[tuple] = None, intercept: bool = True) -> JointScaling:
    """Multifractal detrended partial cross-correlation analysis.

    In every window the increments of x and y are regressed on the
    drivers ``Z`` (rows are driver series); the residuals are cumulated
    inside the window, detrended with a DFA polynomial, and their
    covariance F_v^2 feeds the q-mean ``{<|F_v^2|^{q/2}>}^{1/q}``.
    Windows whose regression is rank deficient are dropped.
    """
    _check_pair(x, y)
    cfg = (cfg or DetrendConfig()).validate()
    if cfg.method != "dfa":
        raise ValidationError("MF-DPXA supports polynomial (DFA) detrending only")
    xi, yi = _as_increments(x), _as_increments(y)
    Zm = None
    if Z is not None and np.size(Z):
        Zm = np.atleast_2d(np.asarray(Z, float))
        if Zm.shape[1] != xi.size:
            raise ValidationError("drivers must have the same length as x and y")
    nz = 0 if Zm is None else Zm.shape[0]
    if Zm is None and not intercept:
        return mf_dcca(x, y, scales, qs, cfg, range)
    qs = np.asarray(qs, float)
    scales = _scale_array(scales).astype(int)
    L = np.full((qs.size, scales.size), np.nan)
    F2 = []
    flags: list = []
    for k, s in enumerate(scales):
        if s <= nz + 2:
            raise ValidationError(f"scale {s} too small for {nz} drivers")
        Rx, okx = _window_residual_profiles(xi, Zm, int(s), cfg.covering, intercept)
        Ry, oky = _window_residual_profiles(yi, Zm, int(s), cfg.covering, intercept)
        ok = okx & oky
        if not ok.all():
            flags.append(f"s={int(s)}: {int((~ok).sum())} rank-deficient windows dropped")
        Q = _poly_basis(int(s), cfg.order)
        Rx = Rx[ok] - (Rx[ok] @ Q) @ Q.T
        Ry = Ry[ok] - (Ry[ok] @ Q) @ Q.T
        f2 = np.mean(Rx * Ry, axis=1)
        F2.append((f2, np.mean(Rx * Rx, axis=1), np.mean(Ry * Ry, axis=1)))
        with np.errstate(divide="ignore"):
            lfv = 0.5 * np.log(np.abs(f2))
        if not np.isfinite(lfv).any():
            raise DegenerateError(f"all partial cross fluctuations vanish at s={s}")
        L[:, k] = _moments(lfv, qs, flags, s)
    h, _, r2, _ = loglog_slopes(scales, L, range)
    rho = np.array([f.sum() / np.sqrt(a.sum() * b.sum()) for f, a, b in F2])
    return JointScaling(qs, scales, L, h, qs * h - 1.0, r2, "mfdpxa", flags, rho=rho)


# ---------------------------------------------------------------------------
# correlation coefficients
# ---------------------------------------------------------------------------

@dataclass
class RhoCurve:
    """rho over scales (``method="dcca"``) or over (q, s) (``"qdcca"``)."""

    rho: np.ndarray
    scales: np.ndarray
    qs: Optional[np.ndarray] = None
    method: str = "dcca"
    flags: list = field(default_factory=list)


def rho_curves(x, y, scales, qs=None, cfg: Optional[DetrendConfig] = None) -> RhoCurve:
    """Detrended cross-correlation coefficients.

    Without ``qs`` this is ``rho(s) = F_xy^2 / (F_xx F_yy)`` from summed
    box covariances. With ``qs`` the q-dependent coefficient
    ``<sign f2 |f2|^{q/2}> / sqrt(<fxx^{q/2}> <fyy^{q/2}>)`` is returned;
    it is bounded by 1 in magnitude for q > 0 (Cauchy-Schwarz), which is
    asserted for every cell.
    """
    _check_pair(x, y)
    cfg = (cfg or DetrendConfig()).validate()
    px, py = _profiles(x, y, cfg)
    scales = _scale_array(scales).astype(int)
    flags: list = []
    if qs is None:
        rho = np.full(scales.size, np.nan)
        for k, s in enumerate(scales):
            f2, a, b = _box_covariances(px, py, int(s), cfg)
            den = np.sqrt(a.sum() * b.sum())
            if den > 0:
                rho[k] = f2.sum() / den
            else:
                flags.append(f"s={int(s)}: zero variance, rho undefined")
        assert np.all(np.abs(rho[np.isfinite(rho)]) <= 1 + 1e-9)
        return RhoCurve(np.clip(rho, -1, 1), scales, None, "dcca", flags)
    qs = np.asarray(qs, float)
    rho = np.full((qs.size, scales.size), np.nan)
    for k, s in enumerate(scales):
        f2, a, b = _box_covariances(px, py, int(s), cfg)
        for i, q in enumerate(qs):
            with np.errstate(divide="ignore", invalid="ignore"):
                num = np.mean(np.sign(f2) * np.abs(f2) ** (q / 2))
                den = np.sqrt(np.mean(a ** (q / 2)) * np.mean(b ** (q / 2)))
            if np.isfinite(num) and np.isfinite(den) and den > 0:
                rho[i, k] = num / den
            else:
                flags.append(f"s={int(s)} q={q:g}: rho undefined")
    pos = qs > 0
    cell = rho[pos]
    assert np.all(np.abs(cell[np.isfinite(cell)]) <= 1 + 1e-9)
    return RhoCurve(rho, scales, qs, "qdcca", flags)
