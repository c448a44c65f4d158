"""How trends bend a fluctuation function, and how to locate the bend.

Adding a linear trend to the increments of white noise makes DFA-1 see
exponent 2 at large scales. The crossover scale has a closed form in the
noise amplitude and trend slope; we pick a slope that puts it at s = 100,
then recover it with a continuous two-segment fit. A periodic component
produces a bump that the same fit localizes near the period.
"""
import numpy as np

from mfkit import fluctmethods as fm, inference as inf
from mfkit.core import make_scales
from mfkit.generators import gen_fgn

n = 2 ** 16
x = gen_fgn(0.5, n, 31).values
sc = make_scales(n, "geometric", 8, n // 8, 1.2).scales


def F(v):
    return np.exp(fm.detrended_fluctuation(v, sc, [2.0]).log_F[0])


H, lb0 = np.polyfit(np.log(sc), np.log(F(x)), 1)
a1 = np.exp(lb0) / (np.sqrt(5) / 60) * 100.0 ** (H - 2)
fit = inf.fit_crossover(sc, F(x + a1 * np.arange(1, n + 1)))
print(f"noise alone: H = {H:.3f}")
print(f"linear trend slope {a1:.2e}: predicted s_x = {inf.dfa_linear_trend_crossover(a1, np.exp(lb0), H):.0f}, "
      f"fitted s_x = {fit.s_cross:.0f}, exponents {fit.H1:.2f} -> {fit.H2:.2f}")

T = 512
z = x + 2.0 * np.sin(2 * np.pi * np.arange(n) / T)
sc2 = make_scales(n, "geometric", 8, n // 8, 1.15).scales
Fz = np.exp(fm.detrended_fluctuation(z, sc2, [2.0]).log_F[0])
mid = (sc2 >= T / 8) & (sc2 <= 8 * T)
per = inf.fit_crossover(sc2[mid], Fz[mid])
print(f"sinusoid with period {T}: fluctuation saturates near s = {per.s_cross:.0f} "
      f"(exponents {per.H1:.2f} -> {per.H2:.2f})")
