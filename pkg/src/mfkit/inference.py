"""
Statistical layer on top of the estimators.

Scaling-range selection, two-regime crossover fits, multifractal
strength measures, surrogate significance tests and the decomposition
of an apparent spectrum width into nonlinear, linear-memory and
distributional parts.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import boxmethods, fluctmethods
from .core import (DegenerateError, InsufficientRangeError, MfError, MfSpectrum, ValidationError,
                   _ols, as_array, make_qgrid, make_scales)
from .surrogates import SurrogateMethod, iaaft, rank_remap


# ---------------------------------------------------------------------------
# scaling range
# ---------------------------------------------------------------------------

@dataclass
class RangePolicy:
    """How to choose the fitting range.

    kind : {"fixed", "brute_r2", "slope_flatness"}
    """

    kind: str = "brute_r2"
    s_lo: Optional[float] = None
    s_hi: Optional[float] = None
    min_decade: float = 1.0
    window: int = 5
    tol: float = 0.05

    def validate(self):
        if self.kind not in ("fixed", "brute_r2", "slope_flatness"):
            raise ValidationError(f"unknown range policy {self.kind!r}")
        if self.kind == "fixed" and (self.s_lo is None or self.s_hi is None):
            raise ValidationError("fixed policy needs s_lo and s_hi")
        return self


@dataclass
class RangeSelection:
    s_lo: float
    s_hi: float
    score: float
    kind: str
    candidates: int = 0


def select_range(xs, Y, policy: Optional[RangePolicy] = None) -> RangeSelection:
    """Pick a scaling range from log-valued rows ``Y`` (nq, ns) over scales ``xs``.

    ``brute_r2`` scans every pair of endpoints spanning at least
    ``min_decade`` decades and keeps the one with the largest mean R^2
    over the rows; ties go to the wider range. ``slope_flatness`` keeps
    the longest run of sliding windows whose local slope changes by less
    than ``tol`` per unit ln s.
    """
    policy = (policy or RangePolicy()).validate()
    xs = np.asarray(xs, float)
    Y = np.atleast_2d(np.asarray(Y, float))
    if policy.kind == "fixed":
        return RangeSelection(policy.s_lo, policy.s_hi, np.nan, "fixed")
    if xs.size < 6:
        raise InsufficientRangeError(f"range selection needs >= 6 scales, got {xs.size}")
    lx = np.log(xs)
    if policy.kind == "brute_r2":
        best = None
        n_cand = 0
        best_span = None
        for a in range(xs.size):
            for b in range(a + 2, xs.size):
                span = np.log10(xs[b] / xs[a])
                if span < policy.min_decade - 1e-12:
                    continue
                n_cand += 1
                r2 = np.mean([_ols(lx[a:b + 1], row[a:b + 1])[2] for row in Y])
                if best is None or r2 > best[0] + 1e-12 or (abs(r2 - best[0]) <= 1e-12 and b - a > best[2] - best[1]):
                    best = (r2, a, b)
                if best_span is None or span > best_span[0]:
                    best_span = (span, a, b)
        if best is None:
            raise InsufficientRangeError(
                f"no range spans {policy.min_decade} decades; widest candidate is "
                f"[{xs[0]:g}, {xs[-1]:g}] ({np.log10(xs[-1] / xs[0]):.2f} decades)")
        return RangeSelection(xs[best[1]], xs[best[2]], best[0], "brute_r2", n_cand)
    # slope flatness
    w = policy.window
    if xs.size < w + 1:
        raise InsufficientRangeError("too few scales for the flatness window")
    starts = np.arange(xs.size - w + 1)
    H = np.array([[_ols(lx[a:a + w], row[a:a + w])[0] for a in starts] for row in Y])
    centers = np.array([lx[a:a + w].mean() for a in starts])
    dh = np.abs(np.gradient(H, centers, axis=1)).max(axis=0)
    flat = dh < policy.tol
    best_len, best_start, run = 0, None, 0
    for i, f in enumerate(flat):
        run = run + 1 if f else 0
        if run > best_len:
            best_len, best_start = run, i - run + 1
    if best_start is None:
        raise InsufficientRangeError(f"no window is flat within tol={policy.tol}; "
                                     f"smallest |dh/dln s| = {dh.min():.3g}")
    a = starts[best_start]
    b = starts[best_start + best_len - 1] + w - 1
    return RangeSelection(xs[a], xs[b], float(dh[best_start:best_start + best_len].max()),
                          "slope_flatness", int(flat.sum()))


# ---------------------------------------------------------------------------
# crossovers
# ---------------------------------------------------------------------------

@dataclass
class CrossoverFit:
    """Continuous two-power-law fit ``F = exp(c1) s^H1`` below s_cross, ``exp(c2) s^H2`` above."""

    s_cross: float
    H1: float
    H2: float
    c1: float
    c2: float
    objective: float
    degenerate: bool = False
    grid: Optional[np.ndarray] = None
    objectives: Optional[np.ndarray] = None


def fit_crossover(xs, ys, n_grid: int = 400, min_side: int = 3) -> CrossoverFit:
    """Least-squares continuous broken power law over a log grid of crossovers.

    For each candidate ln s_x the model ``c1 + H1 ln s + (H2 - H1) max(ln s - ln s_x, 0)``
    is linear, so the fit is exact per candidate; the candidate with the
    smallest summed squared log residual wins. Candidates need at least
    ``min_side`` data points on each side. ``degenerate`` is set when
    |H1 - H2| < 0.05 (no real crossover, s_cross unstable).
    """
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    if xs.size < 8:
        raise InsufficientRangeError(f"crossover fit needs >= 8 scales, got {xs.size}")
    if np.any(ys <= 0):
        raise ValidationError("fluctuation values must be positive")
    lx, ly = np.log(xs), np.log(ys)
    srt = np.sort(lx)
    lo, hi = srt[min_side - 1], srt[-min_side]
    if not hi > lo:
        raise InsufficientRangeError(f"fewer than {min_side} points on each side of every candidate")
    grid = np.linspace(lo, hi, n_grid)
    obj = np.empty(n_grid)
    coefs = np.empty((n_grid, 3))
    for i, k in enumerate(grid):
        A = np.column_stack([np.ones_like(lx), lx, np.maximum(lx - k, 0.0)])
        c, *_ = np.linalg.lstsq(A, ly, rcond=None)
        r = ly - A @ c
        obj[i] = r @ r
        coefs[i] = c
    i = int(np.argmin(obj))
    c1, H1, dH = coefs[i]
    H2 = H1 + dH
    c2 = c1 - dH * grid[i]
    return CrossoverFit(float(np.exp(grid[i])), float(H1), float(H2), float(c1), float(c2),
                        float(obj[i]), abs(dH) < 0.05, np.exp(grid), obj)


def dfa_linear_trend_crossover(a1: float, b0: float, H: float) -> float:
    """Crossover of DFA-1 for a linear trend a1*t added to the increments.

    The trend alone gives F_u = k0 a1 s^2 with k0 = sqrt(5)/60, hence
    ``s_x = (a1 k0 / b0)^{1/(H-2)}`` when the signal obeys F = b0 s^H.
    """
    k0 = np.sqrt(5.0) / 60.0
    return float((a1 * k0 / b0) ** (1.0 / (H - 2.0)))


# ---------------------------------------------------------------------------
# strength measures
# ---------------------------------------------------------------------------

def strength_measures(spec: MfSpectrum) -> dict:
    """Width-type measures of multifractality.

    Returns delta_alpha, delta_h, delta_h12 = H(1) - H(2), d_ineff (mean
    distance of H at the extreme orders from 1/2), c1 = 1 - D1 with
    D1 = f(alpha(1)), f_endpoint = 1 - [f(alpha_min) + f(alpha_max)] / 2
    and skew = (alpha_max - alpha(0)) / (alpha(0) - alpha_min).
    """
    q = np.asarray(spec.q, float)
    for need in (0.0, 1.0, 2.0):
        if not np.any(np.isclose(q, need)):
            raise ValidationError(f"q grid must contain {need:g}")
    if not np.isclose(q.min() + q.max(), 0.0):
        raise ValidationError("strength measures need a symmetric q grid (q_min = -q_max)")
    w = dict(spec.widths)
    ok = np.isfinite(spec.alpha)
    ia, ib = np.argmin(np.where(ok, spec.alpha, np.inf)), np.argmax(np.where(ok, spec.alpha, -np.inf))
    w["f_endpoint"] = float(1.0 - 0.5 * (spec.f_alpha[ia] + spec.f_alpha[ib]))
    return w


STATISTICS = ("delta_alpha", "delta_h", "f_endpoint")


def statistic_of(spec: MfSpectrum, name: str) -> float:
    if name not in STATISTICS:
        raise ValidationError(f"unknown statistic {name!r}; choose from {STATISTICS}")
    if name == "f_endpoint":
        ok = np.isfinite(spec.alpha)
        a = np.where(ok, spec.alpha, np.nan)
        return float(1.0 - 0.5 * (spec.f_alpha[np.nanargmin(a)] + spec.f_alpha[np.nanargmax(a)]))
    return float(spec.widths[name])


# ---------------------------------------------------------------------------
# estimator configuration
# ---------------------------------------------------------------------------

@dataclass
class EstimatorConfig:
    """Everything needed to turn a series into a spectrum.

    method : {"mfdfa", "mfdma", "mfpf", "mfsf", "mffa", "wl"}
    """

    method: str = "mfdfa"
    order: int = 1
    theta: float = 0.0
    q: tuple = (-4.0, 4.0, 0.5)
    spacing: str = "dyadic"
    s_min: int = 16
    s_max: Optional[int] = None
    range: Optional[tuple] = None
    statistic: str = "delta_alpha"
    ratio: float = 2 ** 0.25

    def qgrid(self) -> np.ndarray:
        return make_qgrid(*self.q)

    def scales(self, n: int):
        return make_scales(n, self.spacing, self.s_min, self.s_max or n // 8, self.ratio)

    def run(self, x) -> MfSpectrum:
        v = as_array(x)
        q = self.qgrid()
        if self.method in ("mfdfa", "mfdma"):
            cfg = fluctmethods.DetrendConfig("dfa", self.order) if self.method == "mfdfa" \
                else fluctmethods.DetrendConfig("dma", theta=self.theta)
            surf = fluctmethods.detrended_fluctuation(v, self.scales(v.size), q, cfg)
            return fluctmethods.fluct_exponents(surf, self.range)
        if self.method == "mfpf":
            ps = boxmethods.partition_function(v, self.scales(v.size), q)
            return boxmethods.mass_exponents(ps, self.range)
        if self.method in ("mfsf", "mffa"):
            X = np.concatenate([[0.0], np.cumsum(v)])
            fn = fluctmethods.structure_function if self.method == "mfsf" else fluctmethods.mf_fa
            surf = fn(X, self.scales(v.size), q)
            return fluctmethods.fluct_exponents(surf, self.range)
        if self.method == "wl":
            return fluctmethods.fluct_exponents(fluctmethods.wavelet_leaders(v, q), None)
        raise ValidationError(f"unknown estimator {self.method!r}")

    def statistic_value(self, x) -> float:
        return statistic_of(self.run(x), self.statistic)


# ---------------------------------------------------------------------------
# significance test
# ---------------------------------------------------------------------------

@dataclass
class TestReport:
    statistic: str
    observed: float
    null_values: np.ndarray
    p_value: float
    method: str
    n: int
    failures: int = 0

    @property
    def null_mean(self) -> float:
        return float(np.mean(self.null_values))

    @property
    def null_std(self) -> float:
        return float(np.std(self.null_values))


def _run_ensemble(config: EstimatorConfig, series: Sequence, what: str):
    vals, fails = [], 0
    for s in series:
        try:
            vals.append(config.statistic_value(s))
        except (MfError, FloatingPointError, np.linalg.LinAlgError):
            fails += 1
    if fails > 0.1 * len(series):
        raise DegenerateError(f"estimator failed on {fails}/{len(series)} {what} replicates")
    return np.asarray(vals), fails


def significance_test(x, statistic: str = "delta_alpha", method=None, n: int = 100,
                      config: Optional[EstimatorConfig] = None, base_seed: int = 0,
                      null_series: Optional[Sequence] = None) -> TestReport:
    """One-sided surrogate test of multifractality.

    ``p = (1/n) sum 1(observed <= null_k)``. The default null is IAAFT.
    Passing ``null_series`` skips surrogate generation and uses the given
    replicates as the null ensemble.
    """
    if statistic not in STATISTICS:
        raise ValidationError(f"unknown statistic {statistic!r}")
    config = replace(config or EstimatorConfig(), statistic=statistic)
    if null_series is None:
        if n < 20:
            raise ValidationError("significance tests need n >= 20 replicates")
        method = SurrogateMethod("iaaft") if method is None else \
            (SurrogateMethod(method) if isinstance(method, str) else method)
        method.validate()
        null_series = (method(x, base_seed + i) for i in range(n))
        label = method.kind
        total = n
    else:
        null_series = list(null_series)
        label = "given"
        total = len(null_series)
    obs = config.statistic_value(x)
    null, fails = _run_ensemble(config, list(null_series), "null")
    p = float(np.mean(obs <= null)) if null.size else float("nan")
    return TestReport(statistic, obs, null, p, label, total, fails)


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------

@dataclass
class ComponentDecomposition:
    """Width split ``total = nl + lm + pdf``.

    ``lm`` is the mean width of IAAFT surrogates of x, ``effective`` the
    remainder, ``nl`` the effective width of Gaussian rank-remapped
    copies of x and ``pdf = effective - nl``.
    """

    delta_alpha_total: float
    nl: float
    lm: float
    pdf: float
    effective: float
    details: dict = field(default_factory=dict)

    @property
    def nl_share(self) -> float:
        return self.nl / self.delta_alpha_total if self.delta_alpha_total else float("nan")


def decompose_components(x, config: Optional[EstimatorConfig] = None, n: int = 20,
                         base_seed: int = 0, convention: str = "zhou",
                         iaaft_iter: int = 200) -> ComponentDecomposition:
    """Split the apparent width of x into its three sources.

    With D(.) the estimated width:
    ``lm = mean D(IAAFT(x))``, ``eff = D(x) - lm``,
    ``nl = mean [D(g_k) - D(IAAFT(g_k))]`` with ``g_k`` a Gaussian rank
    remap of x, and ``pdf = eff - nl``.
    """
    if convention != "zhou":
        raise NotImplementedError(f"decomposition convention {convention!r} is not implemented; "
                                  "use 'zhou'")
    if n < 20:
        raise ValidationError("decomposition needs n >= 20 replicates per surrogate family")
    config = replace(config or EstimatorConfig(), statistic="delta_alpha")
    total = config.statistic_value(x)
    surr = [iaaft(x, base_seed + i, max_iter=iaaft_iter) for i in range(n)]
    d_iaaft, f1 = _run_ensemble(config, surr, "IAAFT")
    gs = [rank_remap(x, base_seed + i, law="gaussian") for i in range(n)]
    d_g, f2 = _run_ensemble(config, gs, "rank-remap")
    gsurr = [iaaft(g, base_seed + n + i, max_iter=iaaft_iter) for i, g in enumerate(gs)]
    d_gi, f3 = _run_ensemble(config, gsurr, "IAAFT of rank-remap")
    lm = float(d_iaaft.mean())
    eff = total - lm
    nl = float(d_g.mean() - d_gi.mean())
    pdf = eff - nl
    return ComponentDecomposition(total, nl, lm, pdf, eff,
                                  {"iaaft_widths": d_iaaft, "gauss_widths": d_g,
                                   "gauss_iaaft_widths": d_gi, "failures": f1 + f2 + f3})
