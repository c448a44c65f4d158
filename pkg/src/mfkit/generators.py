"""
Synthetic processes with closed-form multifractal properties.

Every generator is deterministic given its parameters and seed. Cascade
measures are returned normalized to unit mass; the oracles evaluate the
analytic mass exponents that estimators are checked against.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .core import DegenerateError, DomainError, Series, legendre, rng_for

LN2 = np.log(2.0)


# ---------------------------------------------------------------------------
# deterministic cascades
# ---------------------------------------------------------------------------

def _check_m(m):
    if not 0 < m < 1:
        raise DomainError(f"binomial multiplier must lie in (0, 1), got {m}")


def gen_binomial(m: float, levels: int) -> Series:
    """Deterministic binomial p-model measure on ``2**levels`` cells.

    The left daughter of every box receives the fraction ``m`` of its
    mother and the right daughter ``1 - m``.
    """
    _check_m(m)
    if not 1 <= levels <= 26:
        raise DomainError("levels must lie in [1, 26]")
    z = np.ones(1)
    for _ in range(levels):
        z = np.column_stack((m * z, (1 - m) * z)).ravel()
    return Series(z / z.sum(), "measure", f"binomial m={m}", {"m": m, "levels": levels})


def gen_binomial_pair(px: float, py: float, levels: int):
    """Two binomial measures built on the same branching addresses."""
    return gen_binomial(px, levels), gen_binomial(py, levels)


def oracle_binomial(m: float, q):
    """Closed-form tau, alpha and f of the binomial measure.

    Returns
    -------
    tau, alpha, f : numpy.ndarray
    """
    _check_m(m)
    q = np.asarray(q, float)
    a, b = np.log(m), np.log(1 - m)
    # log-sum-exp keeps large |q| finite
    la, lb = q * a, q * b
    mx = np.maximum(la, lb)
    ls = mx + np.log(np.exp(la - mx) + np.exp(lb - mx))
    tau = -ls / LN2
    w = np.exp(la - ls)
    alpha = -(w * a + (1 - w) * b) / LN2
    f = q * alpha - tau
    return tau, alpha, f


def binomial_alpha_range(m: float):
    """(alpha_min, alpha_max) of the binomial measure."""
    _check_m(m)
    return -np.log(max(m, 1 - m)) / LN2, -np.log(min(m, 1 - m)) / LN2


def gen_multinomial(m, levels: int) -> Series:
    """Deterministic multinomial measure with base ``b = len(m)``."""
    m = np.asarray(m, float)
    if m.ndim != 1 or m.size < 2 or np.any(m <= 0) or not np.isclose(m.sum(), 1.0):
        raise DomainError("multinomial weights must be positive and sum to 1")
    z = np.ones(1)
    for _ in range(levels):
        z = (z[:, None] * m[None, :]).ravel()
    return Series(z / z.sum(), "measure", "multinomial", {"m": m.tolist(), "levels": levels})


def oracle_multinomial(m, q):
    """tau(q) = -ln(sum m_i^q) / ln b."""
    m = np.asarray(m, float)
    q = np.atleast_1d(np.asarray(q, float))
    return -np.log(np.sum(m[None, :] ** q[:, None], axis=1)) / np.log(m.size)


# ---------------------------------------------------------------------------
# stochastic cascades
# ---------------------------------------------------------------------------

@dataclass
class CascadeSpec:
    """Parameters of a multiplicative cascade.

    For ``stochastic_multinomial`` the rows of ``multipliers`` are the
    candidate multiplier vectors (each summing to one) and ``probs`` the
    probabilities of drawing each row. ``lognormal_W`` uses ``mu`` and
    ``sigma`` of ln W; ``deterministic_binomial`` reads ``multipliers[0]``
    as m.
    """

    kind: str = "deterministic_binomial"
    multipliers: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None
    levels: int = 12
    seed: int = 0
    mu: Optional[float] = None
    sigma: float = 0.3

    def validate(self):
        if self.levels < 1:
            raise DomainError("levels must be >= 1")
        if self.kind == "deterministic_binomial":
            _check_m(float(np.ravel(self.multipliers)[0]))
        elif self.kind in ("deterministic_multinomial", "stochastic_multinomial"):
            M = np.atleast_2d(np.asarray(self.multipliers, float))
            for i, row in enumerate(M):
                if np.any(row <= 0) or not np.isclose(row.sum(), 1.0):
                    raise DomainError(f"multiplier row {i} must be positive and sum to 1")
            if self.kind == "stochastic_multinomial":
                p = np.asarray(self.probs, float)
                if p.shape != (M.shape[0],) or np.any(p < 0) or not np.isclose(p.sum(), 1.0):
                    raise DomainError("row probabilities must be non-negative and sum to 1")
        elif self.kind == "lognormal_W":
            if not self.sigma > 0:
                raise DomainError("sigma must be positive")
        else:
            raise DomainError(f"unsupported cascade kind {self.kind!r}")
        return self


def gen_cascade(spec: CascadeSpec) -> Series:
    """Generate the measure described by a CascadeSpec."""
    spec.validate()
    if spec.kind == "deterministic_binomial":
        return gen_binomial(float(np.ravel(spec.multipliers)[0]), spec.levels)
    if spec.kind == "deterministic_multinomial":
        return gen_multinomial(np.ravel(spec.multipliers), spec.levels)
    if spec.kind == "stochastic_multinomial":
        return gen_stochastic_multinomial(spec.multipliers, spec.probs, spec.levels, spec.seed)
    return gen_lognormal_cascade(spec.mu, spec.sigma, spec.levels, spec.seed)


def oracle_cascade(spec: CascadeSpec, q):
    """Mass exponents tau(q) of the cascade described by ``spec``."""
    spec.validate()
    if spec.kind == "deterministic_binomial":
        return oracle_binomial(float(np.ravel(spec.multipliers)[0]), q)[0]
    if spec.kind == "deterministic_multinomial":
        return oracle_multinomial(np.ravel(spec.multipliers), q)
    if spec.kind == "stochastic_multinomial":
        return oracle_stochastic_multinomial(spec.multipliers, spec.probs, q)
    mu = conservative_mu(spec.sigma) if spec.mu is None else spec.mu
    return oracle_lognormal_cascade(mu, spec.sigma, q)


def gen_stochastic_multinomial(multipliers, probs, levels: int, seed: int) -> Series:
    """Random multinomial cascade.

    At every level each box independently draws one row of
    ``multipliers`` (with probabilities ``probs``) and splits its mass
    among its ``b`` daughters accordingly. The realization is renormalized
    to unit mass.
    """
    M = np.atleast_2d(np.asarray(multipliers, float))
    p = np.asarray(probs, float)
    CascadeSpec("stochastic_multinomial", M, p, levels, seed).validate()
    rng = rng_for(seed, 1)
    z = np.ones(1)
    for _ in range(levels):
        rows = rng.choice(M.shape[0], size=z.size, p=p)
        z = (z[:, None] * M[rows]).ravel()
    return Series(z / z.sum(), "measure", "stochastic multinomial",
                  {"levels": levels, "seed": seed})


def oracle_stochastic_multinomial(multipliers, probs, q):
    """Annealed mass exponents of the random multinomial cascade.

    With the flattened weights ``p_k`` (row probability repeated over the
    row, so that ``sum p_k = b``) the exponent is
    ``tau(q) = -ln(sum_k p_k m_k^q) / ln b``.
    """
    M = np.atleast_2d(np.asarray(multipliers, float))
    p = np.asarray(probs, float)
    q = np.atleast_1d(np.asarray(q, float))
    b = M.shape[1]
    s = np.einsum("i,qij->q", p, M[None, :, :] ** q[:, None, None])
    return -np.log(s) / np.log(b)


def conservative_mu(sigma: float) -> float:
    """Mean of ln W that makes the lognormal cascade conserve mass on average."""
    return -LN2 - 0.5 * sigma ** 2


def gen_lognormal_cascade(mu: Optional[float], sigma: float, levels: int, seed: int) -> Series:
    """Dyadic cascade with independent lognormal weights ``ln W ~ N(mu, sigma^2)``.

    When ``mu`` is None the conservative choice ``mu = -ln 2 - sigma^2/2``
    is used, for which the generated measure follows
    :func:`oracle_lognormal_cascade` exactly in expectation.
    """
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    if mu is None:
        mu = conservative_mu(sigma)
    rng = rng_for(seed, 2)
    logz = np.zeros(1)
    for _ in range(levels):
        logz = np.repeat(logz, 2) + rng.normal(mu, sigma, size=2 * logz.size)
    z = np.exp(logz - logz.max())
    return Series(z / z.sum(), "measure", "lognormal cascade",
                  {"mu": mu, "sigma": sigma, "levels": levels, "seed": seed})


def oracle_lognormal_cascade(mu: float, sigma: float, q):
    """tau(q) = -sigma^2 q^2 / (2 ln 2) - mu q / ln 2 - 1."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    q = np.asarray(q, float)
    return -sigma ** 2 * q ** 2 / (2 * LN2) - mu * q / LN2 - 1.0


def lognormal_alpha_range(mu: float, sigma: float):
    """Endpoints of the support of f(alpha) for the lognormal cascade."""
    half = np.sqrt(2.0) * sigma / np.sqrt(LN2)
    return -half - mu / LN2, half - mu / LN2


# ---------------------------------------------------------------------------
# Gaussian long-memory noise
# ---------------------------------------------------------------------------

def fgn_autocov(H: float, n: int) -> np.ndarray:
    k = np.arange(n, dtype=float)
    return 0.5 * ((k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))


def _circulant_gaussian(c: np.ndarray, rng: np.random.Generator, size=None) -> np.ndarray:
    """Stationary Gaussian samples with autocovariance ``c`` via circulant embedding.

    Negative eigenvalues of the embedding (if any) are clipped to zero.
    """
    n = c.size
    row = np.concatenate([c, c[-2:0:-1]])
    lam = np.fft.rfft(row).real
    lam = np.clip(lam, 0.0, None)
    m = row.size
    shape = (m // 2 + 1,) if size is None else (size, m // 2 + 1)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    z[..., 0] = z[..., 0].real * np.sqrt(2)
    if m % 2 == 0:
        z[..., -1] = z[..., -1].real * np.sqrt(2)
    y = np.fft.irfft(z * np.sqrt(lam * m / 2.0), n=m)
    return y[..., :n]


def gen_fgn(H: float, n: int, seed: int) -> Series:
    """Fractional Gaussian noise by Fourier filtering of the exact spectrum.

    The fGn autocovariance is embedded in a circulant matrix whose
    eigenvalues are its discrete spectrum; filtering complex white noise
    with their square roots gives a stationary sequence with exactly
    that covariance. Output is standardized to zero mean and unit
    variance.
    """
    if not 0 < H < 1:
        raise DomainError(f"H must lie in (0, 1), got {H}")
    rng = rng_for(seed, 3)
    x = _circulant_gaussian(fgn_autocov(H, n), rng)
    x = (x - x.mean()) / x.std()
    return Series(x, "increments", f"fGn H={H}", {"H": H, "seed": seed})


def gen_arfima_pair(d1: float, d2: float, W: float, n: int, seed: int):
    """Two-component ARFIMA pair sharing innovations with weight ``W``.

    ``x`` is the fractional integration of ``W*e_c + (1-W)*e_1`` with
    order ``d1`` and ``y`` that of ``W*e_c + (1-W)*e_2`` with order ``d2``.
    The Hurst exponents are ``H = d + 1/2``.
    """
    for d in (d1, d2):
        if not 0 < d < 0.5:
            raise DomainError("d must lie in (0, 0.5)")
    if not 0 <= W <= 1:
        raise DomainError("coupling W must lie in [0, 1]")
    rng = rng_for(seed, 4)
    e = rng.standard_normal((3, n))
    u1 = W * e[0] + (1 - W) * e[1]
    u2 = W * e[0] + (1 - W) * e[2]
    return (Series(_frac_integrate(u1, d1), "increments", f"ARFIMA d={d1}"),
            Series(_frac_integrate(u2, d2), "increments", f"ARFIMA d={d2}"))


def _frac_integrate(u: np.ndarray, d: float) -> np.ndarray:
    n = u.size
    k = np.arange(1, n)
    w = np.concatenate([[1.0], np.cumprod((k - 1 + d) / k)])
    m = 2 * n
    return np.fft.irfft(np.fft.rfft(w, m) * np.fft.rfft(u, m), m)[:n]


# ---------------------------------------------------------------------------
# multifractal random walk
# ---------------------------------------------------------------------------

@dataclass
class MrwSpec:
    lambda2: float = 0.05
    sigma: float = 1.0
    T: Optional[int] = None
    n: int = 2 ** 14
    seed: int = 0
    dt: float = 1.0

    def validate(self):
        if not 0 < self.lambda2 < 0.5:
            raise DomainError("lambda2 must lie in (0, 0.5)")
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        return self


def gen_mrw(spec: MrwSpec) -> Series:
    """Multifractal random walk increments ``eps * exp(omega)``.

    ``omega`` is Gaussian with covariance ``lambda2 * ln(T / ((s+1) dt))``
    for ``s + 1 <= T/dt`` (zero beyond) and mean ``-lambda2 ln(T/dt)``;
    ``eps`` is white noise of variance ``sigma^2 dt``.
    """
    spec.validate()
    T = spec.n if spec.T is None else spec.T
    if spec.n > T:
        warnings.warn("n exceeds the integral scale; large scales are monofractal", stacklevel=2)
    lag = np.arange(spec.n, dtype=float)
    ratio = T / ((lag + 1) * spec.dt)
    cov = np.where(ratio >= 1, spec.lambda2 * np.log(np.maximum(ratio, 1.0)), 0.0)
    rng = rng_for(spec.seed, 5)
    omega = _circulant_gaussian(cov, rng) - spec.lambda2 * np.log(T / spec.dt)
    eps = rng.standard_normal(spec.n) * spec.sigma * np.sqrt(spec.dt)
    return Series(eps * np.exp(omega), "increments", "MRW",
                  {"lambda2": spec.lambda2, "T": T, "seed": spec.seed})


def oracle_mrw(lambda2: float, q):
    """Structure-function exponents zeta(q) = -lambda2 q^2 / 2 + (1/2 + lambda2) q.

    Subtract 1 to compare with measure-type tau(q).
    """
    q = np.asarray(q, float)
    return -0.5 * lambda2 * q ** 2 + (0.5 + lambda2) * q


# ---------------------------------------------------------------------------
# Markov-switching multifractal
# ---------------------------------------------------------------------------

@dataclass
class MsmSpec:
    """MSM parameters.

    ``law`` is "binomial" (multipliers ``m0`` or ``2 - m0`` with equal
    probability) or "lognormal". For the lognormal law ``lam`` is the
    parameter of the mass-exponent oracle (``lam = 1`` is monofractal);
    draws use ``ln M ~ N(-l, 2 l)`` with ``l = (lam - 1) ln b``, which
    gives E[M] = 1.
    """

    kbar: int = 8
    b: float = 2.0
    gamma_kbar: float = 0.5
    law: str = "lognormal"
    m0: float = 1.4
    lam: float = 1.1
    sigma: float = 1.0
    n: int = 2 ** 14
    seed: int = 0

    def validate(self):
        if self.kbar < 1:
            raise DomainError("kbar must be >= 1")
        if not self.b > 1:
            raise DomainError("b must exceed 1")
        if not 0 < self.gamma_kbar < 1:
            raise DomainError("gamma_kbar must lie in (0, 1)")
        if self.law == "binomial":
            if not 1 <= self.m0 <= 2:
                raise DomainError(f"m0 must lie in [1, 2], got {self.m0}")
        elif self.law == "lognormal":
            if self.lam < 1:
                raise DomainError("lognormal lam must be >= 1")
        else:
            raise DomainError(f"unknown multiplier law {self.law!r}")
        return self

    def gammas(self) -> np.ndarray:
        k = np.arange(1, self.kbar + 1)
        return 1.0 - (1.0 - self.gamma_kbar) ** (self.b ** (k - self.kbar))


def gen_msm(spec: MsmSpec) -> Series:
    """Markov-switching multifractal returns ``sigma * eps_i * prod sqrt(M_k,i)``.

    Each component is redrawn from the multiplier law with probability
    ``gamma_k`` at every step, independently across components.
    """
    spec.validate()
    rng = rng_for(spec.seed, 6)
    n, K = spec.n, spec.kbar
    g = spec.gammas()

    def draw(size):
        if spec.law == "binomial":
            return np.where(rng.random(size) < 0.5, spec.m0, 2.0 - spec.m0)
        l = (spec.lam - 1.0) * np.log(spec.b)
        return np.exp(rng.normal(-l, np.sqrt(2 * l), size))

    logvol = np.zeros(n)
    for k in range(K):
        switch = rng.random(n) < g[k]
        switch[0] = True
        idx = np.maximum.accumulate(np.where(switch, np.arange(n), 0))
        fresh = draw(n)
        with np.errstate(divide="ignore"):
            logvol += np.log(fresh[idx])
    r = spec.sigma * rng.standard_normal(n) * np.exp(0.5 * logvol)
    return Series(r, "increments", "MSM", {"law": spec.law, "seed": spec.seed})


def oracle_msm_lognormal(lam: float, q):
    """tau(q) = -(lam - 1) q^2 / 4 + lam q / 2 - 1."""
    q = np.asarray(q, float)
    return -(lam - 1.0) * q ** 2 / 4.0 + lam * q / 2.0 - 1.0


# ---------------------------------------------------------------------------
# self-excited multifractal
# ---------------------------------------------------------------------------

@dataclass
class SemfSpec:
    sigma: float = 1.0
    phi: float = 0.1
    h0: float = 0.2
    n: int = 2 ** 12
    seed: int = 0

    def validate(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if self.phi < 0:
            raise DomainError("phi must be >= 0")
        if self.h0 < 0:
            raise DomainError("h0 must be >= 0 for a positive kernel")
        return self


def gen_semf(spec: SemfSpec) -> Series:
    """Self-excited multifractal increments.

    Raises DegenerateError when the feedback drives the volatility factor
    past floating-point range (the process can be explosive).

    ``dX_n = sigma * eta_n * exp(-omega_n / sigma)`` with
    ``omega_n = sum_{i<n} dX_i h_{n-i-1}`` and ``h_k = h0 k^(-1/2-phi)``.
    The kernel at lag 0 is taken as ``h0`` (k is floored at 1).
    """
    spec.validate()
    rng = rng_for(spec.seed, 7)
    n = spec.n
    eta = rng.standard_normal(n)
    k = np.maximum(np.arange(n, dtype=float), 1.0)
    h = spec.h0 * k ** (-0.5 - spec.phi)
    dx = np.zeros(n)
    if spec.h0 == 0:
        dx = spec.sigma * eta
    else:
        # blockwise causal convolution: direct sums inside a block,
        # FFT contribution from all earlier blocks
        B = 256
        omega = np.zeros(n)
        for start in range(0, n, B):
            stop = min(start + B, n)
            if start:
                m = 1 << int(np.ceil(np.log2(start + stop)))
                conv = np.fft.irfft(np.fft.rfft(dx[:start], m) * np.fft.rfft(h[:stop], m), m)
                # omega_t gets sum_{i<start} dx_i h_{t-i-1}
                omega[start:stop] = conv[start - 1:stop - 1]
            for t in range(start, stop):
                w = omega[t]
                if t > start:
                    w += np.dot(dx[start:t], h[t - start - 1::-1][: t - start])
                if -w / spec.sigma > 700.0:
                    raise DegenerateError(f"SEMF path diverged at step {t}; the self-excitation "
                                          "is explosive for these parameters")
                dx[t] = spec.sigma * eta[t] * np.exp(-w / spec.sigma)
    return Series(dx, "increments", "SEMF", {"seed": spec.seed})


# ---------------------------------------------------------------------------
# MMAR
# ---------------------------------------------------------------------------

def gen_fbm(H: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Fractional Brownian path of n+1 points starting at 0 on a unit grid."""
    inc = _circulant_gaussian(fgn_autocov(H, n), rng)
    return np.concatenate([[0.0], np.cumsum(inc)])


def gen_mmar(H: float, cascade: CascadeSpec, n: int, seed: int, oversample: int = 8) -> Series:
    """Fractional Brownian motion in multifractal trading time.

    Trading time theta(t) is the cumulative distribution of the cascade
    measure (mapped onto ``n`` clock steps by linear interpolation). The
    fractional path is drawn independently on a grid ``oversample`` times
    denser than the clock grid and read at theta(t) by interpolation.
    Returns the log-price levels X(t) for t = 0..n.
    """
    if not 0 < H < 1:
        raise DomainError("H must lie in (0, 1)")
    meas = gen_cascade(cascade).values
    U = np.concatenate([[0.0], np.cumsum(meas)])
    grid = np.linspace(0.0, 1.0, U.size)
    theta = np.interp(np.linspace(0.0, 1.0, n + 1), grid, U)
    m = oversample * n
    B = gen_fbm(H, m, rng_for(seed, 8))
    X = np.interp(theta * m, np.arange(m + 1), B)
    return Series(X, "levels", "MMAR", {"H": H, "seed": seed})


def oracle_mmar(H: float, cascade: CascadeSpec, q):
    """tau_X(q) = tau_theta(H q) for the cascade that drives trading time."""
    return oracle_cascade(cascade, H * np.asarray(q, float))


# ---------------------------------------------------------------------------
# Levy flights
# ---------------------------------------------------------------------------

def gen_levy(gamma: float, n: int, seed: int) -> Series:
    """I.i.d. symmetric alpha-stable increments with index ``gamma``."""
    if not 0 < gamma <= 2:
        raise DomainError(f"stable index must lie in (0, 2], got {gamma}")
    rng = rng_for(seed, 9)
    x = stats.levy_stable.rvs(gamma, 0.0, size=n, random_state=rng)
    return Series(x, "increments", f"Levy gamma={gamma}", {"gamma": gamma, "seed": seed})


def oracle_levy(gamma: float, q):
    """Bifractal tau(q): q/gamma - 1 for q <= gamma, 0 beyond."""
    q = np.asarray(q, float)
    return np.where(q <= gamma, q / gamma - 1.0, 0.0)


def oracle_spectrum(q, tau):
    """alpha and f from a closed-form tau by numerical Legendre transform."""
    return legendre(q, tau)
