"""Run the three strategies on a shortened copy of the 8-target scenario.

    python3 demos/compare_strategies.py [t_end]
"""

from __future__ import annotations

import sys

from intermittent_dse.baselines import run_strategy
import numpy as np

from intermittent_dse.runtime import metrics
from intermittent_dse.scenario import STRATEGIES, load


def main(t_end: int = 200, seeds=(0, 1)) -> None:
    sc = load("paper_8x8").replace(t_end=t_end)
    print(f"{sc.name}: {len(sc.robots)} robots, {len(sc.teams)} teams, "
          f"{len(sc.targets)} targets, {t_end} steps")
    for strategy in STRATEGIES:
        ms = [metrics(run_strategy(sc, strategy, s)) for s in seeds]
        e = np.array([m["e_loc_mean"] for m in ms])
        lam = np.array([m["lambda_mean"] for m in ms])
        print(f"  {strategy:<13} e_loc {e.mean():.3f} +- {e.std():.3f} m   "
              f"lambda {lam.mean():.3f} +- {lam.std():.3f} m^2")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 200)
