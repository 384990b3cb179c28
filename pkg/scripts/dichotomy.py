"""Meeting fractions of two coalescing paths by dimension, plus the modified-chain return fraction."""
import argparse

import numpy as np

from drainnet.coalescence import meeting_probability, modified_chain_return
from drainnet.step_law import ModelParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--horizon", type=int, default=10_000)
    ap.add_argument("--replicas", type=int, default=300)
    ap.add_argument("--sep", type=int, default=10)
    ap.add_argument("--restart-horizon", type=int, default=0, help="also run the modified chain (slow)")
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    marks = [h for h in (10, 100, 1000, 10_000, 100_000) if h <= a.horizon]
    print("d  " + "  ".join(f"by {h:>6}" for h in marks))
    for d in (2, 3, 4):
        params = ModelParams(d, a.p)
        sep = np.zeros(d - 1, dtype=np.int64)
        sep[0] = a.sep
        est = meeting_probability(params, sep, a.horizon, a.replicas, a.seed)
        print(f"{d}  " + "  ".join(f"{est.fraction_by(h):9.3f}" for h in marks))
    if a.restart_horizon:
        for d in (2, 4):
            params = ModelParams(d, a.p)
            restart = np.zeros(d - 1, dtype=np.int64)
            restart[0] = 1
            r = modified_chain_return(params, restart, a.restart_horizon, 10, a.seed)
            print(f"modified chain d={d}: returned fraction {r.returned_fraction:.3f} over {r.excursions} excursions")


if __name__ == "__main__":
    main()
