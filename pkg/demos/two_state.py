"""Two-state caricature and polynomial escape near the neutral point.

Lumping [0, eps0] into one state gives a 2x2 chain whose gap a + b
shrinks like eps0^alpha.  The chain hides the real behaviour: survivors
in [0, x_j] decay like k^(-1/alpha), so there is no geometric escape rate.
"""
import numpy as np

from intermit import analysis, maps

m = maps.lsv(0.5)
for eps0 in (1e-2, 1e-3, 1e-4):
    t = analysis.two_state(m, eps0)
    print(f"eps0={eps0:g}: a={t.a:.5f} b={t.b:.2e} second eigenvalue {t.eigenvalues[1]:.6f}"
          f" invariant weight of [0, eps0] {t.invariant[0]:.4f}")

x3 = maps.preimage_sequence(m, 3).values[3]
p = analysis.escape_profile(m, x3, 10000)
k = np.arange(100, 10001)
print(f"survivor slope {analysis.scaling_fit(np.column_stack([k, p[k]])).slope:.3f},"
      f" one-step survival at k=10^4: {p[-1] / p[-2]:.6f}")
