"""Controlled vs open-loop decay of the line error system over a range of c.

For each c = lambda*/eps* the script prints the late-time log-slope of the
L2 norm with and without boundary control next to the target -eps* pi^2.
"""
import argparse

import numpy as np

from viscoctl.admittance import ErrorPdeCoeffs
from viscoctl.backstepping import ErrorState, KernelTable, closed_loop_step
from viscoctl.field import GridSpec, ScalarField, norms


def slope(c, controlled, nx, t_end):
    spec = GridSpec(nx, 1, 1, transverse=False)
    coeffs = ErrorPdeCoeffs(1.0, c)
    kernel = KernelTable.for_field(coeffs, spec) if controlled else None
    dt = 0.9 * spec.cfl_bound(1.0)
    x = spec.axes()[0]
    s = ErrorState(0.0, ScalarField(spec, (x * (1 - x) * (1 + x))[:, None, None]))
    ts, ns = [], []
    while s.t < t_end:
        s = closed_loop_step(s, kernel, coeffs, dt)
        ts.append(s.t)
        ns.append(norms(s.phi_e)[0])
    ts, ns = np.array(ts), np.array(ns)
    late = ts > t_end / 3
    return np.polyfit(ts[late], np.log(ns[late]), 1)[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cs", type=float, nargs="+", default=[0, 5, 12, 20, 30, 40])
    ap.add_argument("--nx", type=int, default=31)
    ap.add_argument("--t-end", type=float, default=0.6)
    a = ap.parse_args()
    print(f"{'c':>6} {'open':>9} {'oracle':>9} {'controlled':>11} {'target':>9}")
    for c in a.cs:
        print(f"{c:6.1f} {slope(c, False, a.nx, a.t_end):9.3f} {c - np.pi**2:9.3f} "
              f"{slope(c, True, a.nx, a.t_end):11.3f} {-np.pi**2:9.3f}")


if __name__ == "__main__":
    main()
