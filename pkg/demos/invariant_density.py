"""Invariant density of an intermittent map from its Ulam matrix.

The LSV map x(1 + (2x)^a) / 2x - 1 has a neutral fixed point at 0, and its
invariant density blows up there like x^-a.  Ulam's method sees this as a
heavy first bin and a straight tail on log-log axes.
"""
import numpy as np

from intermit import analysis, maps, spectral, ulam

m = maps.lsv(0.5)
N = 10000

P = ulam.assemble(m, N)
print(f"P_N: {P.shape}, {P.nnz} nonzeros, row sums within {np.abs(P.row_sums() - 1).max():.1e}")

res = spectral.leading(P, tol=1e-12)
print(f"power iteration: {res.iterations} steps, residual {res.residual:.1e}")

density = res.eigenvector * N
for x in (1e-3, 1e-2, 1e-1, 0.5, 0.9):
    print(f"  h({x:g}) ~ {density[int(x * N)]:.4f}")

# skip the singular first bin, fit one decade and a bit
slope = analysis.density_tail_slope(res.eigenvector, (2, 200))
print(f"tail slope {slope:.3f} (power law x^-{m.alpha})")
