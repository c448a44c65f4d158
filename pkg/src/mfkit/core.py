"""
Shared numeric types and helpers used by every estimator.

The module holds the series container, the profile, log-log regression,
the numerical Legendre transform, scale and moment grids and the
spectrum record that joins tau(q), h(q), alpha and f(alpha).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ROLES = ("increments", "levels", "measure")


class MfError(Exception):
    """Base class for toolkit errors."""


class ValidationError(MfError, ValueError):
    """Input rejected before any computation."""


class DomainError(ValidationError):
    """Parameter or value outside the admissible domain."""


class InsufficientRangeError(MfError):
    """Too few points to fit a scaling law."""


class DegenerateError(MfError):
    """Computation collapsed (all fluctuations zero and similar)."""


@dataclass
class Series:
    """Finite real sequence tagged with its role.

    Parameters
    ----------
    values : array_like
        Sample values.
    role : {"increments", "levels", "measure"}
        How estimators should interpret the values.
    name : str
        Free-form label.
    meta : dict
        Optional metadata (sampling step, generator parameters, diagnostics).
    """

    values: np.ndarray
    role: str = "increments"
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if self.role not in ROLES:
            raise ValidationError(f"unknown role {self.role!r}")
        if v.size < 2:
            raise ValidationError("series needs at least 2 values")
        bad = np.flatnonzero(~np.isfinite(v))
        if bad.size:
            raise ValidationError(f"non-finite value at index {bad[0]}")
        if self.role == "measure":
            if np.any(v < 0):
                raise DomainError(f"negative measure at index {np.flatnonzero(v < 0)[0]}")
            if not v.sum() > 0:
                raise DomainError("measure has zero total mass")
        self.values = v

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def as_array(x, role: Optional[str] = None) -> np.ndarray:
    """Return a float array from a Series or array-like, checking finiteness."""
    if isinstance(x, Series):
        if role is not None and x.role != role:
            raise ValidationError(f"expected a {role} series, got {x.role}")
        return x.values
    v = np.asarray(x, dtype=float).ravel()
    bad = np.flatnonzero(~np.isfinite(v))
    if bad.size:
        raise ValidationError(f"non-finite value at index {bad[0]}")
    return v


def as_measure(x) -> np.ndarray:
    """Validate a non-negative measure and normalize it to unit mass."""
    v = as_array(x)
    if isinstance(x, Series) and x.role != "measure":
        raise ValidationError(f"expected a measure series, got {x.role}")
    if np.any(v < 0):
        raise DomainError(f"negative measure at index {np.flatnonzero(v < 0)[0]}")
    total = v.sum()
    if not total > 0:
        raise DomainError("measure has zero total mass")
    return v / total


def build_profile(x, remove_mean: bool = True) -> np.ndarray:
    """Cumulative profile of an increment series.

    Parameters
    ----------
    x : Series or array_like
        Increments.
    remove_mean : bool
        Subtract the sample mean before summing. Turning it off keeps a
        constant drift in the profile, which is what translation
        invariance checks need.

    Returns
    -------
    numpy.ndarray
        ``profile[i] = sum_{j<=i} (x[j] - mean(x))``.
    """
    if isinstance(x, Series) and x.role != "increments":
        raise ValidationError(f"profile needs increments, got {x.role}")
    v = as_array(x)
    if v.size < 2:
        raise ValidationError("series needs at least 2 values")
    if remove_mean:
        v = v - v.mean()
    return np.cumsum(v)


@dataclass
class ScaleGrid:
    scales: np.ndarray
    spacing: str = "custom"

    def __post_init__(self):
        s = np.asarray(self.scales)
        if s.ndim != 1 or s.size == 0:
            raise ValidationError("empty scale grid")
        if np.any(s <= 0) or np.any(np.diff(s) <= 0):
            raise ValidationError("scales must be positive and strictly increasing")
        self.scales = s.astype(int)

    def __len__(self):
        return self.scales.size

    def __iter__(self):
        return iter(self.scales)

    def __array__(self, dtype=None, copy=None):
        return self.scales if dtype is None else self.scales.astype(dtype)


@dataclass
class ScalingFit:
    """Ordinary least-squares fit of ln y on ln x."""

    exponent: float
    intercept: float
    r_squared: float
    range: tuple
    residuals: np.ndarray
    stderr: float = float("nan")


def _scale_array(scales) -> np.ndarray:
    if isinstance(scales, ScaleGrid):
        return scales.scales
    return np.asarray(scales)


def fit_loglog(xs, ys, range: Optional[tuple] = None, weights=None) -> ScalingFit:
    """Fit ``y = c * x**a`` by least squares in log-log coordinates.

    Parameters
    ----------
    xs, ys : array_like
        Positive abscissae (scales) and ordinates.
    range : (lo, hi), optional
        Inclusive bounds on ``xs``; all points are used when omitted.
    weights : array_like, optional
        Inverse-variance weights for a weighted fit.

    Returns
    -------
    ScalingFit
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ValidationError("xs and ys differ in shape")
    keep = np.ones(xs.size, bool) if range is None else (xs >= range[0]) & (xs <= range[1])
    keep &= np.isfinite(ys)
    if keep.sum() < 3:
        raise InsufficientRangeError(f"only {int(keep.sum())} points inside the fit range")
    x, y = xs[keep], ys[keep]
    if np.any(x <= 0):
        raise DomainError("non-positive abscissa")
    if np.any(y <= 0):
        i = np.flatnonzero(y <= 0)[0]
        raise DomainError(f"non-positive value {y[i]!r} at scale {x[i]:g}")
    w = None if weights is None else np.asarray(weights, float)[keep]
    slope, icpt, r2, res, se = _ols(np.log(x), np.log(y), w)
    return ScalingFit(slope, icpt, r2, (x[0], x[-1]), res, se)


def _ols(lx, ly, w=None):
    if w is None:
        w = np.ones_like(lx)
    sw = w.sum()
    mx = (w * lx).sum() / sw
    my = (w * ly).sum() / sw
    dx = lx - mx
    sxx = (w * dx * dx).sum()
    slope = (w * dx * (ly - my)).sum() / sxx
    icpt = my - slope * mx
    res = ly - icpt - slope * lx
    ss_tot = (w * (ly - my) ** 2).sum()
    ss_res = (w * res * res).sum()
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    n = lx.size
    se = np.sqrt(ss_res / (n - 2) / sxx) if n > 2 else np.nan
    return float(slope), float(icpt), float(r2), res, float(se)


def loglog_slopes(xs, Y, range: Optional[tuple] = None, xlog: bool = True):
    """Row-wise OLS slopes of ``Y`` (already in log units) against ln xs.

    ``Y`` has shape (nq, ns). Cells that are not finite are skipped row by
    row. Returns (slopes, intercepts, r2, stderr), each of length nq.
    """
    xs = np.asarray(xs, float)
    lx_all = np.log(xs) if xlog else xs
    Y = np.atleast_2d(np.asarray(Y, float))
    sel = np.ones(xs.size, bool) if range is None else (xs >= range[0]) & (xs <= range[1])
    out = np.full((4, Y.shape[0]), np.nan)
    for i, row in enumerate(Y):
        k = sel & np.isfinite(row)
        if k.sum() < 3:
            raise InsufficientRangeError(f"row {i}: only {int(k.sum())} usable scales")
        out[0, i], out[1, i], out[2, i], _, out[3, i] = _ols(lx_all[k], row[k])
    return out[0], out[1], out[2], out[3]


def legendre(q, tau):
    """Numerical Legendre transform of tau(q).

    alpha is the central finite difference of tau (one-sided at the ends)
    on the possibly non-uniform q grid and ``f = q*alpha - tau``.
    """
    q = np.asarray(q, float)
    tau = np.asarray(tau, float)
    if q.size < 3:
        raise ValidationError("Legendre transform needs at least 3 q values")
    if np.any(np.diff(q) <= 0):
        raise ValidationError("q must be strictly increasing")
    alpha = np.gradient(tau, q, edge_order=1)
    # np.gradient uses the second-order non-uniform stencil inside; on a
    # uniform grid this is the plain central difference
    f = q * alpha - tau
    return alpha, f


def make_qgrid(lo: float = -4.0, hi: float = 4.0, step: float = 0.25) -> np.ndarray:
    """Inclusive q grid ``lo:hi:step`` with exact zero when it is crossed."""
    if step <= 0 or hi < lo:
        raise ValidationError("bad q grid")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    q = lo + step * np.arange(n)
    q[np.abs(q) < 1e-12] = 0.0
    return np.round(q, 12)


def make_scales(n: int, spacing: str = "dyadic", floor: int = 4, ceiling: Optional[int] = None,
                ratio: float = 2 ** 0.25) -> ScaleGrid:
    """Build a box-size grid for a series of length ``n``.

    Parameters
    ----------
    n : int
        Series length.
    spacing : {"dyadic", "divisors", "geometric"}
        Powers of two, exact divisors of ``n``, or a rounded geometric
        sequence with ratio ``ratio``.
    floor, ceiling : int
        Inclusive bounds; ``ceiling`` defaults to ``n // 4``.

    Examples
    --------
    >>> make_scales(100, "geometric", 4, 25, ratio=2 ** 0.5).scales.tolist()
    [4, 6, 8, 11, 16, 23]
    """
    if ceiling is None:
        ceiling = n // 4
    if floor < 1:
        raise ValidationError("scale floor must be >= 1")
    if spacing == "dyadic":
        lo = int(np.ceil(np.log2(floor)))
        s = [2 ** k for k in range(lo, 64) if 2 ** k <= ceiling]
    elif spacing == "divisors":
        s = [d for d in range(floor, ceiling + 1) if n % d == 0]
    elif spacing == "geometric":
        if ratio <= 1:
            raise ValidationError("geometric ratio must exceed 1")
        m = int(np.floor(np.log(ceiling / floor) / np.log(ratio) + 1e-9)) + 1 if ceiling >= floor else 0
        raw = np.rint(floor * ratio ** np.arange(max(m, 0))).astype(int)
        s = sorted(set(int(v) for v in raw if floor <= v <= ceiling))
    else:
        raise ValidationError(f"unknown spacing {spacing!r}")
    if not s:
        raise ValidationError(f"empty scale grid for n={n}, [{floor}, {ceiling}]; "
                              f"try floor<={max(1, n // 16)} and ceiling>={min(n // 4, 4 * floor)}")
    return ScaleGrid(np.array(s, dtype=int), spacing)


@dataclass
class MfSpectrum:
    """Joined multifractal curves with fit diagnostics.

    ``h`` is the generalized Hurst exponent where defined (NaN otherwise),
    ``d_q`` the generalized dimension ``tau/(q-1)`` with the q=1 value
    filled from the information-dimension fit when available.
    """

    q: np.ndarray
    tau: np.ndarray
    h: np.ndarray
    alpha: np.ndarray
    f_alpha: np.ndarray
    d_q: np.ndarray
    widths: dict
    r_squared: Optional[np.ndarray] = None
    stderr: Optional[np.ndarray] = None
    fit_range: Optional[tuple] = None
    method: str = ""

    def at(self, q: float, name: str = "tau") -> float:
        i = np.flatnonzero(np.isclose(self.q, q))
        if i.size == 0:
            raise KeyError(f"q={q} not on the grid")
        return float(getattr(self, name)[i[0]])


def widths(q, tau, h, alpha, f) -> dict:
    """Strength measures of a spectrum.

    Returns delta_alpha, delta_h, delta_h12 = H(1)-H(2), d_ineff =
    mean distance of H at the q extremes from 1/2, c1 = 1 - f(alpha(1))
    and skew. Measures that need a missing grid point are NaN.
    """
    q = np.asarray(q, float)
    out = {}
    ok = np.isfinite(alpha)
    out["delta_alpha"] = float(alpha[ok].max() - alpha[ok].min()) if ok.any() else np.nan
    hk = np.isfinite(h)
    out["delta_h"] = float(h[hk].max() - h[hk].min()) if hk.any() else np.nan

    def pick(arr, v):
        i = np.flatnonzero(np.isclose(q, v))
        return float(arr[i[0]]) if i.size else np.nan

    out["delta_h12"] = pick(h, 1.0) - pick(h, 2.0)
    if hk.any():
        lo, hi = np.flatnonzero(hk)[[0, -1]]
        out["d_ineff"] = 0.5 * (abs(h[lo] - 0.5) + abs(h[hi] - 0.5))
    else:
        out["d_ineff"] = np.nan
    out["c1"] = 1.0 - pick(f, 1.0)
    a0 = pick(alpha, 0.0)
    if ok.any() and np.isfinite(a0):
        amin, amax = alpha[ok].min(), alpha[ok].max()
        den = a0 - amin
        out["skew"] = float((amax - a0) / den) if den > 0 else np.nan
    else:
        out["skew"] = np.nan
    return out


def spectrum_from_tau(q, tau, h=None, d1: Optional[float] = None, method: str = "",
                      r_squared=None, stderr=None, fit_range=None) -> MfSpectrum:
    """Assemble an MfSpectrum from a sampled tau(q)."""
    q = np.asarray(q, float)
    tau = np.asarray(tau, float)
    if q.size >= 3:
        alpha, f = legendre(q, tau)
    else:
        # too few orders for a derivative; exponents are still reported
        alpha = np.full(q.size, np.nan)
        f = np.full(q.size, np.nan)
    if h is None:
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(q != 0, (tau + 1.0) / q, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        dq = np.where(np.isclose(q, 1.0), np.nan, tau / (q - 1.0))
    if d1 is not None:
        dq[np.isclose(q, 1.0)] = d1
    return MfSpectrum(q, tau, np.asarray(h, float), alpha, f, dq,
                      widths(q, tau, np.asarray(h, float), alpha, f),
                      r_squared, stderr, fit_range, method)


def log_mean_power(logv: np.ndarray, p: float, axis=-1) -> np.ndarray:
    """``ln mean(exp(p * logv))`` computed with max rescaling."""
    a = p * logv
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = np.exp(a - m).mean(axis=axis, keepdims=True)
    return np.squeeze(np.log(s) + m, axis=axis)


def rng_for(seed, stream: int = 0) -> np.random.Generator:
    """Private random stream derived from (seed, stream)."""
    if seed is None:
        raise ValidationError("a seed is required")
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream),)))
