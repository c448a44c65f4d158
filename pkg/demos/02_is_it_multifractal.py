"""Is a measured spectrum width real, or just finite-size noise?

A Gaussian fGn has a single scaling exponent but any finite estimate of
its spectrum has nonzero width. We compare it with a random-sign binomial
walk, test both against an IAAFT null (same spectrum and distribution,
phases scrambled), then split each width into nonlinear, linear and
distributional parts.
"""
from mfkit import inference as inf
from mfkit.core import rng_for
from mfkit.generators import gen_binomial, gen_fgn
from mfkit.surrogates import SurrogateMethod

cfg = inf.EstimatorConfig(q=(-4.0, 4.0, 1.0), s_min=16)
null = SurrogateMethod("iaaft", {"max_iter": 100})

levels = 13
m = gen_binomial(0.3, levels).values
walk = m * rng_for(0, 77).choice([-1.0, 1.0], m.size)
series = {"fGn H=0.5": gen_fgn(0.5, 2 ** levels, 1).values, "binomial walk": walk}

for name, x in series.items():
    rep = inf.significance_test(x, "delta_alpha", null, n=40, config=cfg, base_seed=10)
    d = inf.decompose_components(x, cfg, n=20, base_seed=10, iaaft_iter=100)
    print(f"{name}:")
    print(f"  delta_alpha = {rep.observed:.3f}, IAAFT null {rep.null_mean:.3f} +- {rep.null_std:.3f}, "
          f"p = {rep.p_value:.3f}")
    print(f"  parts: NL {d.nl:+.3f}  LM {d.lm:+.3f}  PDF {d.pdf:+.3f}  (NL share {d.nl_share:.2f})")

print("\nThe fGn width sits inside its null; over half of the walk's width is nonlinear structure.")
