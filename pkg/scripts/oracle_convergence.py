"""Grid refinement study of the plant against the eigen-series solution.

Prints the max relative L2 error for a sequence of grids (n, 2n+1, ...) and
the ratio between successive levels; about 4 is second-order convergence.
"""
import argparse

from viscoctl.runner import run_oracle_check
from viscoctl.scenario import load


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="scenarios/oracle_box.yaml")
    ap.add_argument("--levels", type=int, default=3)
    a = ap.parse_args()
    sc = load(a.config)
    prev = None
    print(f"{'grid':>10} {'rel_l2':>12} {'ratio':>8}")
    for _ in range(a.levels):
        err = run_oracle_check(sc).values["max_rel_l2_error"]
        g = sc.grid
        ratio = f"{prev / err:8.2f}" if prev else " " * 8
        print(f"{g['nx']:>4}x{g['ny']}x{g['nz']:<3} {err:12.4e} {ratio}")
        prev = err
        spec = sc.grid_spec().refined()
        sc.grid = dict(sc.grid, nx=spec.nx, ny=spec.ny, nz=spec.nz)


if __name__ == "__main__":
    main()
