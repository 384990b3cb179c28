"""Tabulate the decoupling probability against both radius bounds over a (p, s) grid."""
import argparse

from drainnet.coupling import decoupling_probability
from drainnet.step_law import ModelParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=4)
    ap.add_argument("--ps", default="0.3,0.5,0.7,0.9")
    ap.add_argument("--seps", default="2,3,4,5,6,7,8")
    ap.add_argument("--replicas", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    print(f"{'p':>5} {'s':>3} {'estimate':>10} {'se':>9} {'floor(s/2)':>11} {'ceil(s/2)-1':>12} {'viol':>5}")
    for p in map(float, a.ps.split(",")):
        params = ModelParams(a.dim, p)
        for s in map(int, a.seps.split(",")):
            e = decoupling_probability(params, s, a.replicas, a.seed + s)
            print(f"{p:5.2f} {s:3d} {e.estimate:10.3e} {e.se:9.1e} {e.bound:11.3e} {e.corrected_bound:12.3e} {e.violations:5d}")


if __name__ == "__main__":
    main()
