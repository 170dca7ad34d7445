"""The averaged operator's second eigenvalue sits in (e2/e1, 2 e2/e1).

eps = 1/(N T'(x0+)) fixes a hole depth n in the first-return tower; e1 is
the measure of all columns deeper than n, e2 that of column n + 1.  With
this choice the averaging window [0, eps0) is a single Ulam bin, so the
averaged operator coincides with P_N.

The last two columns are reference values from an earlier computation with
a map of the same family whose coefficients are unknown; they run at about
half of ours.
"""
from intermit import analysis, maps

rows = analysis.bound_table(maps.lsv(0.5), [100, 200, 500, 1000, 2000, 5000])
print(f"{'N':>6} {'n':>4} {'e2/e1':>9} {'1-lam2':>9} {'2e2/e1':>9} {'ref 1-lam2':>11} {'ref e2/e1':>10}")
for r in rows:
    print(f"{r['N']:>6} {r['n']:>4} {r['eps2_over_eps1']:9.5f} {r['one_minus_lambda2_averaged']:9.5f}"
          f" {r['bound_hi']:9.5f} {r['reference_one_minus_lambda2']:11.5f} {r['reference_eps2_over_eps1']:10.5f}")
