"""Random-motion selection trials: success rate per method and ordering inversions.

Example
-------
    python scripts/trial_suite.py --trials 50 --seed 0
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

from stackselect.assess import AssessConfig, Method
from stackselect.cpd import AlsConfig
from stackselect.evalmetrics import ordering_inversions, run_method_suites, success_rate
from stackselect.motion import RandomMotionConfig


@dataclass
class TrialSuiteConfig:
    trials: int = 50
    seed: int = 0
    size: int = 64
    local_rot_deg: float = 5.0
    local_trans_mm: float = 1.0
    cp_init: str = "svd"


def run(cfg: TrialSuiteConfig):
    motion = RandomMotionConfig(local_max_rot_deg=cfg.local_rot_deg, local_max_trans_mm=cfg.local_trans_mm)
    methods = [AssessConfig(Method.CP, als=AlsConfig(init_scheme=cfg.cp_init)),
               AssessConfig(Method.SVD_RSS), AssessConfig(Method.SVD_FS)]
    seeds = range(cfg.seed, cfg.seed + cfg.trials)
    return run_method_suites(seeds, motion, methods, cfg.trials, cfg.size)


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=("random", "svd"), default="svd")
    args = p.parse_args()
    out = run(TrialSuiteConfig(trials=args.trials, seed=args.seed, cp_init=args.init))
    for method, outcomes in out.items():
        print(f"{method.value:7s} success rate {success_rate(outcomes):.3f}")
    for inv in ordering_inversions(out):
        print(f"inversion: trial {inv['trial']} (seed {inv['trial_seed']}) {inv['better']} failed, "
              f"{inv['worse']} succeeded")


if __name__ == "__main__":
    main()
