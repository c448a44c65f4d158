"""
Surrogate series for null-hypothesis testing.

Shuffling keeps the value distribution and destroys all correlations,
phase randomization keeps the periodogram, AAFT/IAAFT keep both the
distribution and (approximately) the periodogram, and rank remapping
swaps the distribution while keeping the rank order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import DomainError, Series, ValidationError, as_array, rng_for

_STREAM = {"shuffle": 20, "ft_phase": 21, "aaft": 22, "iaaft": 23, "rank_remap": 24}
KINDS = tuple(_STREAM)


@dataclass
class SurrogateMethod:
    """Surrogate recipe; ``params`` is forwarded to the generator.

    Examples
    --------
    >>> SurrogateMethod("iaaft", {"max_iter": 200}).validate().kind
    'iaaft'
    """

    kind: str = "iaaft"
    params: dict = field(default_factory=dict)

    def validate(self):
        if self.kind not in _STREAM:
            raise ValidationError(f"unknown surrogate kind {self.kind!r}")
        if self.kind == "iaaft":
            if self.params.get("max_iter", 1000) < 1:
                raise ValidationError("max_iter must be >= 1")
            if not self.params.get("tol", 1e-8) > 0:
                raise ValidationError("tol must be positive")
        return self

    def __call__(self, x, seed: int) -> Series:
        return _DISPATCH[self.kind](x, seed, **self.params)


@dataclass
class SurrogateEnsemble:
    method: SurrogateMethod
    replicates: list
    seeds: list

    @property
    def count(self) -> int:
        return len(self.replicates)


def _wrap(x, values, kind, meta=None) -> Series:
    role = x.role if isinstance(x, Series) and x.role != "measure" else "increments"
    name = (x.name if isinstance(x, Series) else "") + f"[{kind}]"
    return Series(values, role, name, meta or {})


def shuffle(x, seed: int) -> Series:
    """Uniform random permutation of the values."""
    v = as_array(x)
    if v.size < 2:
        raise ValidationError("shuffling needs at least 2 samples")
    return _wrap(x, rng_for(seed, _STREAM["shuffle"]).permutation(v), "shuffle")


def _random_phases(n: int, rng) -> np.ndarray:
    ph = rng.uniform(0.0, 2 * np.pi, n // 2 + 1)
    ph[0] = 0.0
    if n % 2 == 0:
        ph[-1] = 0.0  # Nyquist term must stay real
    return ph


def ft_phase(x, seed: int, phase_scale: float = 1.0) -> Series:
    """Fourier-transform surrogate with randomized phases.

    ``phase_scale = 0`` leaves the phases untouched (identity). The DC
    term and, for even n, the Nyquist term are kept real so the output
    is real and the periodogram is preserved exactly.
    """
    v = as_array(x)
    if v.size < 8:
        raise ValidationError("phase randomization needs at least 8 samples")
    F = np.fft.rfft(v)
    ph = phase_scale * _random_phases(v.size, rng_for(seed, _STREAM["ft_phase"]))
    return _wrap(x, np.fft.irfft(F * np.exp(1j * ph), n=v.size), "ft_phase")


def _rank_order(template: np.ndarray, values_sorted: np.ndarray, kind: str = "stable") -> np.ndarray:
    out = np.empty_like(values_sorted)
    out[np.argsort(template, kind=kind)] = values_sorted
    return out


def aaft(x, seed: int) -> Series:
    """Amplitude-adjusted FT surrogate.

    Gaussian noise is rank-ordered like x, phase-randomized, then the
    original values are rank-ordered like the result.
    """
    v = as_array(x)
    if v.size < 8:
        raise ValidationError("AAFT needs at least 8 samples")
    rng = rng_for(seed, _STREAM["aaft"])
    g = _rank_order(v, np.sort(rng.standard_normal(v.size)))
    F = np.fft.rfft(g)
    g2 = np.fft.irfft(F * np.exp(1j * _random_phases(v.size, rng)), n=v.size)
    return _wrap(x, _rank_order(g2, np.sort(v)), "aaft")


def periodogram_error(a: np.ndarray, target_amp: np.ndarray) -> float:
    """Relative RMS error of |FFT| against the target amplitudes."""
    return _amp_error(np.abs(np.fft.rfft(a)), target_amp)


def _amp_error(amp, target_amp) -> float:
    return float(np.sqrt(np.mean((amp - target_amp) ** 2) / np.mean(target_amp ** 2)))


def iaaft(x, seed: int, max_iter: int = 1000, tol: float = 1e-8) -> Series:
    """Iterative AAFT surrogate.

    Starts from a random shuffle and alternates spectrum replacement
    with rank ordering to the original values; always ends on the rank
    step so the value multiset is exact. Iteration stops when the
    periodogram error drops below ``tol``, stops improving, or
    ``max_iter`` is reached. The best iterate is returned, so the
    recorded error sequence is non-increasing.

    ``meta`` carries ``spectral_error``, ``iterations``, ``converged``
    and ``errors`` (the per-iteration history).
    """
    v = as_array(x)
    if v.size < 8:
        raise ValidationError("IAAFT needs at least 8 samples")
    if max_iter < 1 or not tol > 0:
        raise ValidationError("need max_iter >= 1 and tol > 0")
    rng = rng_for(seed, _STREAM["iaaft"])
    amp = np.abs(np.fft.rfft(v))
    srt = np.sort(v)
    cur = rng.permutation(v)
    F = np.fft.rfft(cur)
    best, best_err = cur, _amp_error(np.abs(F), amp)
    errors = [best_err]
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        mag = np.abs(F)
        phase = np.where(mag > 0, F / np.where(mag > 0, mag, 1.0), 1.0)
        spec = np.fft.irfft(amp * phase, n=v.size)
        # quicksort is deterministic and ties in the spectral step are measure-zero
        nxt = _rank_order(spec, srt, kind="quicksort")
        F = np.fft.rfft(nxt)
        err = _amp_error(np.abs(F), amp)
        if err >= best_err:
            break
        best, best_err, cur = nxt, err, nxt
        errors.append(err)
        if err <= tol:
            converged = True
            break
    meta = {"spectral_error": best_err, "iterations": it, "converged": converged,
            "errors": errors}
    return _wrap(x, best, "iaaft", meta)


_LAWS = ("gaussian", "weibull", "student")


def rank_remap(x, seed: int, law: str = "gaussian", beta: float = 1.0,
               gamma: float = 3.0) -> Series:
    """Replace the values by draws from a target law in the same rank order.

    The draws are rescaled to the source mean and standard deviation.
    ``weibull`` is the two-sided (double) Weibull with shape ``beta``;
    ``student`` has ``gamma`` degrees of freedom.
    """
    v = as_array(x)
    rng = rng_for(seed, _STREAM["rank_remap"])
    meta = {"law": law}
    if law == "gaussian":
        z = rng.standard_normal(v.size)
    elif law == "weibull":
        if not beta > 0:
            raise DomainError("Weibull shape must be positive")
        if beta < 1:
            meta["flag"] = "weibull shape below 1 gives a stretched-exponential tail"
        z = stats.dweibull.rvs(beta, size=v.size, random_state=rng)
    elif law == "student":
        if not gamma > 0:
            raise DomainError("Student degrees of freedom must be positive")
        if gamma <= 2:
            meta["flag"] = "infinite variance for gamma <= 2"
        z = rng.standard_t(gamma, size=v.size)
    else:
        raise ValidationError(f"unknown target law {law!r}; choose from {_LAWS}")
    sd = z.std()
    z = (z - z.mean()) * (v.std() / sd if sd > 0 else 1.0) + v.mean()
    return _wrap(x, _rank_order(v, np.sort(z)), f"rank_remap:{law}", meta)


_DISPATCH = {"shuffle": shuffle, "ft_phase": ft_phase, "aaft": aaft, "iaaft": iaaft,
             "rank_remap": rank_remap}


def make_ensemble(x, method, n: int, base_seed: int) -> SurrogateEnsemble:
    """``n`` replicates with seeds ``base_seed .. base_seed + n - 1``.

    At least 20 replicates are advisable for significance testing.
    """
    if isinstance(method, str):
        method = SurrogateMethod(method)
    method.validate()
    if n < 1:
        raise ValidationError("ensemble size must be >= 1")
    seeds = [int(base_seed) + i for i in range(n)]
    return SurrogateEnsemble(method, [method(x, s) for s in seeds], seeds)
