"""
Measure-based estimators.

Partition functions and generalized dimensions, the direct (canonical
measure) spectrum, the inverse partition function with the inversion
check, the multiplier method and ensemble averaging.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (DomainError, InsufficientRangeError, MfSpectrum,
                   ValidationError, _scale_array, as_measure, loglog_slopes,
                   spectrum_from_tau)


@dataclass
class PartitionSurface:
    """ln chi(q, s) on a (q, s) lattice.

    ``sum_mlnm`` holds sum m ln m per scale (information entropy with a
    minus sign) so that D_1 can be fitted without a separate pass.
    """

    log_chi: np.ndarray
    qs: np.ndarray
    scales: np.ndarray
    sum_mlnm: np.ndarray
    counts: np.ndarray
    zero_box_policy: str = "exclude"
    covering: str = "divisors"


def box_masses(m: np.ndarray, s: int, covering: str = "divisors") -> np.ndarray:
    """Masses of consecutive boxes of size ``s``.

    With ``covering="continuous"`` the cumulative measure is linearly
    interpolated so that any integer s is admissible; the trailing
    fraction of the series that does not fill a box is dropped.
    """
    n = m.size
    if covering == "divisors":
        if n % s:
            raise ValidationError(f"scale {s} does not divide N={n}; use covering='continuous'")
        return m.reshape(-1, s).sum(axis=1)
    if covering == "continuous":
        if n % s == 0:
            return m.reshape(-1, s).sum(axis=1)
        U = np.concatenate([[0.0], np.cumsum(m)])
        edges = np.arange(0, n - s + 1, s)
        return np.diff(U[np.concatenate([edges, [edges[-1] + s]])]) if edges.size else np.array([])
    raise ValidationError(f"unknown covering {covering!r}")


def _log_power_sums(mu: np.ndarray, qs: np.ndarray, policy: str):
    """ln sum mu^q for every q with max rescaling; zero boxes dropped for q <= 0."""
    pos = mu > 0
    if policy == "error" and not pos.all():
        raise DomainError("zero-mass box encountered")
    lm = np.log(mu[pos])
    out = np.empty(qs.size)
    for i, q in enumerate(qs):
        a = q * lm
        mx = a.max()
        out[i] = mx + np.log(np.exp(a - mx).sum())
    return out, lm


def partition_function(m, scales, qs, covering: str = "divisors",
                       zero_box_policy: str = "exclude") -> PartitionSurface:
    """q-order partition function chi(q, s) = sum_boxes m_box^q.

    Parameters
    ----------
    m : Series or array_like
        Non-negative measure; it is normalized to unit mass.
    scales : array_like of int
        Box sizes in samples.
    qs : array_like
        Moment orders.
    covering : {"divisors", "continuous"}
        Require ``s | N`` or use the interpolated cumulative measure.
    """
    mu = as_measure(m)
    qs = np.asarray(qs, float)
    scales = _scale_array(scales).astype(int)
    L = np.empty((qs.size, scales.size))
    H = np.empty(scales.size)
    C = np.empty(scales.size, int)
    for j, s in enumerate(scales):
        b = box_masses(mu, int(s), covering)
        if b.size == 0:
            raise InsufficientRangeError(f"scale {s} exceeds the series length")
        L[:, j], lm = _log_power_sums(b, qs, zero_box_policy)
        H[j] = np.sum(np.exp(lm) * lm)
        C[j] = lm.size
    return PartitionSurface(L, qs, scales, H, C, zero_box_policy, covering)


def mass_exponents(ps: PartitionSurface, range: Optional[tuple] = None) -> MfSpectrum:
    """tau(q) as slopes of ln chi(q, s) against ln s, with D_q and the Legendre pair.

    D_1 is the slope of ``sum m ln m`` against ln s.
    """
    tau, _, r2, se = loglog_slopes(ps.scales, ps.log_chi, range)
    d1, *_ = loglog_slopes(ps.scales, ps.sum_mlnm[None, :], range)
    rng_used = range or (int(ps.scales[0]), int(ps.scales[-1]))
    return spectrum_from_tau(ps.qs, tau, d1=float(d1[0]), method="mfpf",
                             r_squared=r2, stderr=se, fit_range=rng_used)


@dataclass
class DirectSpectrum:
    q: np.ndarray
    alpha: np.ndarray
    f: np.ndarray
    tau: np.ndarray
    alpha_stderr: np.ndarray
    f_stderr: np.ndarray


def direct_spectrum(m, scales, qs, covering: str = "divisors",
                    range: Optional[tuple] = None) -> DirectSpectrum:
    """alpha(q) and f(q) from the canonical measure mu = m^q / sum m^q.

    alpha is the slope of sum mu ln m against ln s and f that of
    sum mu ln mu; tau is rebuilt as q alpha - f.
    """
    meas = as_measure(m)
    qs = np.asarray(qs, float)
    scales = _scale_array(scales).astype(int)
    A = np.empty((qs.size, scales.size))
    F = np.empty_like(A)
    for j, s in enumerate(scales):
        b = box_masses(meas, int(s), covering)
        lm = np.log(b[b > 0])
        for i, q in enumerate(qs):
            a = q * lm
            a = a - a.max()
            w = np.exp(a)
            lz = np.log(w.sum())
            mu = w / w.sum()
            A[i, j] = np.dot(mu, lm)
            F[i, j] = np.dot(mu, a - lz)
    # slopes of already-logged quantities: regress directly on ln s
    alpha, _, _, ase = _slopes_linear(scales, A, range)
    f, _, _, fse = _slopes_linear(scales, F, range)
    return DirectSpectrum(qs, alpha, f, qs * alpha - f, ase, fse)


def _slopes_linear(scales, Y, range):
    """OLS slope of Y (not logged) against ln s, row by row."""
    from .core import _ols
    s = np.asarray(scales, float)
    sel = np.ones(s.size, bool) if range is None else (s >= range[0]) & (s <= range[1])
    if sel.sum() < 3:
        raise InsufficientRangeError("fewer than 3 scales in range")
    out = np.empty((4, Y.shape[0]))
    for i, row in enumerate(Y):
        k = sel & np.isfinite(row)
        out[0, i], out[1, i], out[2, i], _, out[3, i] = _ols(np.log(s[k]), row[k])
    return out


# ---------------------------------------------------------------------------
# inverse partition function
# ---------------------------------------------------------------------------

@dataclass
class InverseSurface:
    """ln chi_dagger(mu, p) indexed (p, threshold)."""

    log_chi_dag: np.ndarray
    ps: np.ndarray
    thresholds: np.ndarray
    plateaus: int = 0


def exit_sizes(m, J: int) -> np.ndarray:
    """Sizes s_j (in units of total length) needed to accumulate mass 1/J.

    The cumulative measure U(t) is linear inside each cell; crossings of
    the levels j/J are located exactly. Zero-mass plateaus are skipped by
    taking the first time each level is reached.
    """
    mu = as_measure(m)
    n = mu.size
    U = np.concatenate([[0.0], np.cumsum(mu)])
    U[-1] = 1.0
    levels = np.arange(1, J + 1) / J
    levels[-1] = 1.0
    k = np.searchsorted(U, levels, side="left")  # first index with U >= level
    k = np.clip(k, 1, n)
    lo, hi = U[k - 1], U[k]
    frac = np.where(hi > lo, (levels - lo) / np.where(hi > lo, hi - lo, 1.0), 1.0)
    t = (k - 1 + np.clip(frac, 0.0, 1.0)) / n
    return np.diff(np.concatenate([[0.0], t]))


def inverse_partition(m, thresholds, ps) -> InverseSurface:
    """Inverse partition function chi_dagger(mu, p) = sum_j (s_j / T)^p.

    Parameters
    ----------
    thresholds : array_like
        Mass levels mu with 1/mu integer.
    ps : array_like
        Orders p.
    """
    mu_levels = np.asarray(thresholds, float)
    J = np.rint(1.0 / mu_levels).astype(int)
    if np.any(np.abs(J * mu_levels - 1.0) > 1e-9) or np.any(J < 1):
        raise ValidationError("every threshold must be 1/J with J a positive integer")
    ps = np.asarray(ps, float)
    meas = as_measure(m)
    plateaus = int(np.sum(meas == 0))
    L = np.empty((ps.size, J.size))
    for j, Jj in enumerate(J):
        s = exit_sizes(meas, int(Jj))
        s = s[s > 0]
        ls = np.log(s)
        for i, p in enumerate(ps):
            a = p * ls
            mx = a.max()
            L[i, j] = mx + np.log(np.exp(a - mx).sum())
    if plateaus:
        warnings.warn(f"{plateaus} zero-mass cells skipped in exit sizes", stacklevel=2)
    return InverseSurface(L, ps, mu_levels, plateaus)


def inverse_exponents(inv: InverseSurface, range: Optional[tuple] = None) -> np.ndarray:
    """tau_dagger(p): slope of ln chi_dagger against ln mu."""
    tau_dag, *_ = loglog_slopes(inv.thresholds[::-1], inv.log_chi_dag[:, ::-1], range)
    return tau_dag


def invert_check(q, tau, p, tau_dag, return_curve: bool = False):
    """Largest residual of the inversion formula tau(q) = -tau_dag^{-1}(-q).

    tau_dag is treated as a monotone piecewise-linear function of p and
    inverted by interpolation. q values whose -q lies outside the sampled
    range of tau_dag are ignored.
    """
    q = np.asarray(q, float)
    tau = np.asarray(tau, float)
    p = np.asarray(p, float)
    td = np.maximum.accumulate(np.asarray(tau_dag, float))
    ok = (-q >= td[0]) & (-q <= td[-1])
    if not ok.any():
        raise InsufficientRangeError("tau_dagger range does not cover any -q")
    pstar = np.interp(-q[ok], td, p)
    res = np.abs(tau[ok] + pstar)
    if return_curve:
        return float(res.max()), q[ok], -pstar
    return float(res.max())


# ---------------------------------------------------------------------------
# multiplier method
# ---------------------------------------------------------------------------

@dataclass
class MultiplierSample:
    base: int
    multipliers: np.ndarray
    mother_size: int


def multipliers(v, base: int = 2, mother_size: Optional[int] = None) -> MultiplierSample:
    """Daughter-to-mother mass ratios on non-overlapping mother boxes."""
    mu = as_measure(v)
    if base < 2:
        raise ValidationError("base must be >= 2")
    n = mu.size
    if mother_size is None:
        mother_size = base ** 2
    if mother_size % base or mother_size > n:
        raise ValidationError("mother box must be a multiple of the base and fit in the series")
    nb = n // mother_size
    M = mu[: nb * mother_size].reshape(nb, base, mother_size // base).sum(axis=2)
    tot = M.sum(axis=1)
    keep = tot > 0
    return MultiplierSample(base, (M[keep] / tot[keep, None]).ravel(), mother_size)


def multiplier_spectrum(v, base: int = 2, qs=None, mother_size: Optional[int] = None) -> MfSpectrum:
    """tau, alpha and f from moments of the multipliers.

    ``tau(q) = -1 - ln<W^q>/ln a``,
    ``alpha = -<W^q ln W>/(<W^q> ln a)`` and
    ``f = (<W^q> ln<W^q> - <W^q ln W^q>)/(<W^q> ln a)``.
    Only q > -1 is accepted since negative moments of multipliers
    diverge at -1.
    """
    qs = np.asarray(qs if qs is not None else np.arange(-0.75, 4.01, 0.25), float)
    if np.any(qs <= -1):
        raise DomainError("multiplier moments diverge for q <= -1")
    smp = multipliers(v, base, mother_size)
    w = smp.multipliers
    if np.any(w == 0) and np.any(qs <= 0):
        warnings.warn("zero multipliers dropped for q <= 0", stacklevel=2)
    la = np.log(base)
    tau = np.empty(qs.size)
    alpha = np.empty(qs.size)
    f = np.empty(qs.size)
    pos = w > 0
    lw = np.log(w[pos])
    for i, q in enumerate(qs):
        wq = np.exp(q * lw)
        # zero multipliers contribute W^q = 0 when q > 0
        n_all = w.size if q > 0 else lw.size
        Mq = wq.sum() / n_all
        Mql = (wq * lw).sum() / n_all
        tau[i] = -1.0 - np.log(Mq) / la
        alpha[i] = -Mql / (Mq * la)
        f[i] = (Mq * np.log(Mq) - q * Mql) / (Mq * la)
    spec = spectrum_from_tau(qs, tau, method=f"multiplier a={base}")
    spec.alpha = alpha
    spec.f_alpha = f
    from .core import widths
    spec.widths = widths(qs, tau, spec.h, alpha, f)
    return spec


def multiplier_base_check(v, a: int, b: int, qs) -> float:
    """max |tau_a(q) - tau_b(q)| between two multiplier bases."""
    ta = multiplier_spectrum(v, a, qs, mother_size=a * b).tau
    tb = multiplier_spectrum(v, b, qs, mother_size=a * b).tau
    return float(np.max(np.abs(ta - tb)))


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

@dataclass
class EnsembleResult:
    quenched: MfSpectrum
    annealed: MfSpectrum


def ensemble_tau(measures: Sequence, scales, qs, mode: str = "both",
                 covering: str = "divisors", range: Optional[tuple] = None):
    """Quenched (fit of <ln chi>) and annealed (fit of ln<chi>) mass exponents.

    Returns an EnsembleResult when ``mode="both"`` and the requested
    MfSpectrum otherwise.
    """
    measures = list(measures)
    if len(measures) < 2:
        raise ValidationError("an ensemble needs at least 2 series")
    lens = {len(np.asarray(m)) for m in measures}
    if len(lens) != 1:
        raise ValidationError(f"heterogeneous series lengths {sorted(lens)}")
    surf = np.stack([partition_function(m, scales, qs, covering).log_chi for m in measures])
    sc = _scale_array(scales)
    q_log = surf.mean(axis=0)
    mx = surf.max(axis=0)
    a_log = mx + np.log(np.exp(surf - mx).mean(axis=0))
    tq, _, r2q, _ = loglog_slopes(sc, q_log, range)
    ta, _, r2a, _ = loglog_slopes(sc, a_log, range)
    quen = spectrum_from_tau(qs, tq, method="quenched", r_squared=r2q)
    ann = spectrum_from_tau(qs, ta, method="annealed", r_squared=r2a)
    if mode == "quenched":
        return quen
    if mode == "annealed":
        return ann
    return EnsembleResult(quen, ann)
