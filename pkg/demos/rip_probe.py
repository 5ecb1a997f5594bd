# Monte-Carlo probing of the restricted-isometry deviation for Gaussian
# designs. The deviation shrinks like 1/sqrt(n), which is what makes the
# contraction factor rho = 1/2 attainable once n is large enough.
import math

import numpy as np

from lowrank_iht import estimate_rip_constant, gen_gaussian_design

d, k = 16, 2
rng = np.random.default_rng(3)
print("      n   max deviation   4 sqrt(k/2) dev")
for n in (1000, 4000, 16000):
    batch = gen_gaussian_design(n, d, rng.integers(1 << 31))
    rip = estimate_rip_constant(batch, k, trials=200, seed=rng.integers(1 << 31))
    lhs = 4.0 * math.sqrt(k / 2.0) * rip.max_deviation
    ok = "rho=1/2 certified" if lhs <= 0.5 else "too small for rho=1/2"
    print(f"{n:7d}   {rip.max_deviation:13.4f}   {lhs:15.4f}   {ok}")
