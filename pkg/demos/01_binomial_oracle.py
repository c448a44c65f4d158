"""Three estimators against one exactly known cascade.

The deterministic binomial measure with m = 0.3 has a closed-form mass
exponent tau(q). We build it at 2^18 points and compare what the
partition function, MF-DFA and wavelet leaders recover.
"""
import numpy as np

from mfkit import boxmethods as bm, fluctmethods as fm
from mfkit.core import make_qgrid, make_scales, spectrum_from_tau
from mfkit.generators import gen_binomial, oracle_binomial

levels = 18
n = 2 ** levels
m = gen_binomial(0.3, levels)
q = make_qgrid(-4, 4, 1.0)
tau_true = oracle_binomial(0.3, q)[0]

# The partition function sees the measure directly, so it is exact.
pf = bm.mass_exponents(bm.partition_function(m, make_scales(n, "dyadic", 1, n // 2), q))

# MF-DFA reads the same numbers as increments of a walk; the small scales
# carry a polynomial-fit bias, so we fit from s = 256 upward.
dfa = fm.fluct_exponents(fm.detrended_fluctuation(m, make_scales(n, "dyadic", 16, n // 8), q),
                         (256, n // 8))

# Wavelet leaders are noisier for negative q; keep q >= -2.
qw = q[q >= -2]
wl = fm.fluct_exponents(fm.wavelet_leaders(m, qw, (4, levels - 3)))

print(f"{'q':>5} {'oracle':>9} {'MF-PF':>9} {'MF-DFA':>9} {'WL':>9}")
for i, qq in enumerate(q):
    w = wl.tau[np.flatnonzero(qw == qq)[0]] if qq >= -2 else np.nan
    print(f"{qq:5.1f} {tau_true[i]:9.4f} {pf.tau[i]:9.4f} {dfa.tau[i]:9.4f} {w:9.4f}")

# widths use the same finite-difference Legendre transform for all three
print(f"\nspectrum width: oracle {spectrum_from_tau(q, tau_true).widths['delta_alpha']:.3f}, "
      f"MF-PF {pf.widths['delta_alpha']:.3f}, MF-DFA {dfa.widths['delta_alpha']:.3f}")
print("MF-PF is exact to rounding; the detrended estimators land within a few hundredths.")
