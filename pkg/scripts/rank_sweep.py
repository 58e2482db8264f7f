"""CP (or SVD-RSS) RMI and timing against rank on the phantom; CSV to stdout.

Example
-------
    python scripts/rank_sweep.py --ranks 1 50 --orientation coronal
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

from stackselect.assess import AssessConfig, Method
from stackselect.cpd import AlsConfig
from stackselect.evalmetrics import rank_sweep
from stackselect.motion import acquire_stack, apply_motion, linear_trajectory, stack_geometry
from stackselect.volume import make_phantom


@dataclass
class RankSweepConfig:
    method: str = "cp"
    first_rank: int = 1
    last_rank: int = 50
    rot_step_deg: float = 5.0
    trans_step_mm: float = 1.0
    orientation: str = "axial"
    seed: int = 0
    size: int = 64
    cp_init: str = "svd"


def run(cfg: RankSweepConfig):
    v, m = make_phantom(cfg.size, cfg.seed)
    n = stack_geometry(v, cfg.orientation, 2.0)[2]
    before = acquire_stack(v, m, cfg.orientation)
    after = apply_motion(v, m, linear_trajectory(n, cfg.rot_step_deg, cfg.trans_step_mm), cfg.orientation)
    acfg = AssessConfig(Method.parse(cfg.method), als=AlsConfig(init_scheme=cfg.cp_init))
    return rank_sweep(before, after, range(cfg.first_rank, cfg.last_rank + 1), acfg)


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--method", choices=("cp", "svd-rss"), default="cp")
    p.add_argument("--ranks", type=int, nargs=2, default=[1, 50])
    p.add_argument("--orientation", default="axial")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    cfg = RankSweepConfig(method=args.method, first_rank=args.ranks[0], last_rank=args.ranks[1],
                          orientation=args.orientation, seed=args.seed)
    print("rank,rmi,elapsed_ms")
    for pt in run(cfg):
        print(f"{pt.rank},{pt.rmi:.6f},{pt.elapsed_ms:.1f}")


if __name__ == "__main__":
    main()
