"""
Escape from the unstable zero state
===================================

At (0, 0) the mode-0 block [[kappa, 0], [1, -1]] has the positive eigenvalue
kappa.  Starting a small distance delta along its eigenvector, the solution
leaves any fixed neighbourhood and the early growth rate matches kappa.
"""

# %%
import numpy as np

from parastab import SystemField, instability_probe, make_chemotaxis, spectral_bound

for kappa in (0.3, 0.7, 1.5):
    prob = make_chemotaxis(2.0, kappa, K=16)
    zero = prob.equilibria[0]
    sb = spectral_bound(prob.linearization(zero)).spectral_bound
    c = np.zeros((2, 16))
    c[:, 0] = [1.0, 1.0 / (kappa + 1.0)]
    verdict = instability_probe(prob, zero, SystemField(prob.domain, c), [1e-2, 1e-3, 1e-4],
                                T_max=60 / kappa, N=1200)
    ev = verdict.evidence
    print(f"kappa={kappa}: spectral bound {sb}, verdict {verdict.verdict}")
    for delta, t_esc, rate in zip(ev["deltas"], ev["escape_times"], ev["growth_rates"]):
        print(f"  delta={delta:.0e}: escape at t={t_esc:.2f}, growth rate {rate:.4f}")
