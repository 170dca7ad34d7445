"""Conditionally invariant densities on a truncated Young tower.

Points of [x0, 1] climb their return column and drop back through the full
branch T^i.  Cutting the tower above depth n opens a hole whose trace on
the base is [x0, gamma_n); the fixed point of the normalised transfer
operator gives the escape factor lambda_n.  Three checks:
  * 1 - lambda_n is exactly the conditional mass sitting on the hole,
  * the interval system with hole [0, x_{n-1}) has the same eigenvalue,
  * the base density stays uniformly bounded as n grows.
"""
from intermit import maps, spectral, tower, ulam

m = maps.lsv(0.5)
xs = maps.preimage_sequence(m, 64).values
results = []
for n in (4, 8, 16, 32, 64):
    r = tower.accim_fixed_point(m, n, M=2048, tol=1e-13)
    results.append(r)
    lam_interval = spectral.substochastic_leading(ulam.open_exact(m, 2048, xs[n - 1]), tol=1e-13).eigenvalue
    print(f"n={n:3d}  lambda_n={r.lambda_n:.10f}  1-lambda-mass={abs(1 - r.lambda_n - r.hole_mass):.1e}"
          f"  interval={lam_interval:.10f}  max/min base={r.base_density.max() / r.base_density.min():.3f}")

rep = tower.accim_bounds_check(results)
lo, hi = rep["escape_ratio_range"]
print(f"tower eigenfunction in [{rep['global_min']:.3f}, {rep['global_max']:.3f}];"
      f" -log(lambda_n)/nu(H) in [{lo:.3f}, {hi:.3f}]")
