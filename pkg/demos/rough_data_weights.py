"""
Time weights for rough initial data
===================================

Heat flow from data barely inside H^{s_c}: coefficients
(1+lam_k)^{-s_c/2} (k+1)^{-0.51}.  The weighted norm t^mu ||u(t)||_{H^s}
with mu = (s - s_c)/2 tends to zero as t -> 0, but only like t^0.005, so the
sequence at t = 2^-j keeps growing until j is near 28 before it turns.
"""

# %%
import numpy as np

from parastab import BlockGenerator, Domain1D, SystemField, WeightedTrajectory, gradient_profile, weighted_vanishing
from parastab.linops import apply_semigroup

g = gradient_profile(1, 2.5, 4.0, 0.275)
dom = Domain1D(1.0, "dirichlet")
K = 2 ** 18
lam = dom.eigenvalues(K)
c = (1 + lam) ** (-g.s_c / 2) * (dom.wavenumbers(K) + 1.0) ** -0.51
gen = BlockGenerator.from_affine(dom, K, [[0.0]], [[-1.0]])
u0 = SystemField(dom, c[None])

levels = list(range(4, 33))
ts = np.array([2.0 ** -j for j in reversed(levels)])
states = np.array([apply_semigroup(gen, t, u0).coefficients for t in ts])
rep = weighted_vanishing(WeightedTrajectory(dom, ts, states), g.mu, g.s, levels=levels)
for j, v in zip(levels, rep.values):
    print(f"j={j:2d}  t^mu ||u||_Hs = {v:.6f}")
print("largest value at j =", levels[int(np.argmax(rep.values))])
