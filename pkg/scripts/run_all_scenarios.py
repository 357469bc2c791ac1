"""Run every scenario in scenarios/ through the CLI into one output tree.

    python scripts/run_all_scenarios.py --out runs/ [--svg]
"""
import argparse
import pathlib
import sys

from viscoctl.cli import main

COMMAND = {"identify": "identify", "dual": "dual-loop", "oracle": "oracle-check"}


def run(out: pathlib.Path, svg: bool) -> int:
    root = pathlib.Path(__file__).resolve().parents[1] / "scenarios"
    worst = 0
    for path in sorted(root.glob("*.yaml")):
        cmd = COMMAND[path.stem.split("_")[0]]
        argv = [cmd, "--config", str(path), "--out", str(out / path.stem)]
        if svg:
            argv.append("--svg")
        code = main(argv)
        print(f"-> {path.stem}: exit {code}\n")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--svg", action="store_true")
    a = ap.parse_args()
    sys.exit(run(pathlib.Path(a.out), a.svg))
