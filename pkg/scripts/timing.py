"""Wall time of CP assessment for three isotropic phantom stacks.

Example
-------
    STACKSELECT_THREADS=4 python scripts/timing.py --size 192
"""

from __future__ import annotations

import argparse
import time

from stackselect.assess import AssessConfig, Method, select_reference
from stackselect.volume import make_phantom


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=192)
    p.add_argument("--rank", type=int, default=25)
    args = p.parse_args()
    stacks = [(*make_phantom(args.size, s), f"s{s}") for s in range(3)]
    t0 = time.perf_counter()
    winner, reports = select_reference(stacks, AssessConfig(Method.CP, rank=args.rank))
    total = time.perf_counter() - t0
    for r in reports:
        print(f"{r.stack_id}: mi={r.mi:.4e} elapsed={r.elapsed_ms / 1e3:.2f}s")
    print(f"winner {winner}; total {total:.2f}s")


if __name__ == "__main__":
    main()
