"""Second eigenvalue of P_N closes on 1 like N^-alpha.

A neutral fixed point makes mixing slow, and the Ulam matrix inherits this
as a spectral gap that vanishes polynomially in the resolution.  Escape
through the first bin, by contrast, scales like 1/N for every alpha.
"""
from intermit import analysis, maps, spectral, ulam

Ns = [128 * 2**k for k in range(7)]

for alpha in (0.25, 0.5, 0.75):
    m = maps.lsv(alpha)
    gaps, escapes = [], []
    for N in Ns:
        P = ulam.assemble(m, N)
        pi = spectral.leading(P, tol=1e-12)
        lam2 = spectral.second(P, pi, tol=1e-12).eigenvalue
        gaps.append((N, 1 - lam2))
        lam_open = spectral.substochastic_leading(ulam.open_submatrix(P, [0]), tol=1e-13).eigenvalue
        escapes.append((N, 1 - lam_open))
    g = analysis.scaling_fit(gaps)
    e = analysis.scaling_fit(escapes)
    print(f"alpha={alpha}: gap slope {g.slope:+.3f} (r2 {g.r_squared:.4f}),"
          f" escape slope {e.slope:+.3f} (r2 {e.r_squared:.4f})")
