"""Experiment-level metrics (RMI, BMI, success rate) and the seeded trial suite."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .assess import AssessConfig, Method, MotionReport, assess, select_reference
from .errors import DivisionByZeroBaseline, EmptyInput, TrialError
from .motion import RandomMotionConfig, acquire_stack, apply_motion, random_trajectory, stack_geometry
from .volume import make_phantom

ORIENTATIONS = ("axial", "coronal", "sagittal")


def rmi(mi_after: float, mi_before: float) -> float:
    """Ratio of the motion indicator after to before adding motion."""
    if not mi_before > 0:
        raise DivisionByZeroBaseline(f"baseline MI must be > 0, got {mi_before}")
    return mi_after / mi_before


def bmi(mi_other: float, mi_axial: float) -> float:
    """Ratio of a motion-free stack's MI to the motion-free axial stack's MI."""
    if not mi_axial > 0:
        raise DivisionByZeroBaseline(f"axial MI must be > 0, got {mi_axial}")
    return mi_other / mi_axial


@dataclass(frozen=True)
class TrialOutcome:
    trial_seed: int
    motion_free_id: str
    selected_id: str
    reports: tuple[MotionReport, ...]
    ambiguous: bool = False

    @property
    def success(self) -> bool:
        return self.selected_id == self.motion_free_id

    def to_dict(self) -> dict:
        return {
            "trial_seed": self.trial_seed,
            "motion_free_id": self.motion_free_id,
            "selected_id": self.selected_id,
            "ambiguous": self.ambiguous,
            "reports": [r.to_dict() for r in self.reports],
        }


def success_rate(outcomes) -> float:
    outcomes = list(outcomes)
    if not outcomes:
        raise EmptyInput("success rate of an empty trial list")
    return sum(o.success for o in outcomes) / len(outcomes)


@dataclass(frozen=True)
class TrialStacks:
    trial_seed: int
    motion_free_id: str
    stacks: list = field(default_factory=list)  # (Volume, Mask, id)
    trajectories: dict = field(default_factory=dict)
    still: bool = False  # every stack motion-free


def build_trial(
    trial_seed: int,
    motion_cfg: RandomMotionConfig,
    size: int = 64,
    slice_thickness_mm: float = 2.0,
) -> TrialStacks:
    """Phantom plus axial, coronal and sagittal stacks; two of them get random motion.

    The motion-free orientation and both trajectory seeds are drawn from the
    trial seed.
    """
    vol, mask = make_phantom(size, trial_seed)
    rng = np.random.default_rng([int(trial_seed), 0x5E1EC7])
    free = ORIENTATIONS[int(rng.integers(3))]
    traj_seeds = rng.integers(0, 2**31 - 1, size=len(ORIENTATIONS))
    stacks, trajs = [], {}
    still = motion_cfg.local_max_rot_deg == 0 and motion_cfg.local_max_trans_mm == 0
    for orient, tseed in zip(ORIENTATIONS, traj_seeds):
        if orient == free:
            s, m = acquire_stack(vol, mask, orient, slice_thickness_mm)
        else:
            _, _, n, _ = stack_geometry(vol, orient, slice_thickness_mm)
            traj = random_trajectory(n, replace(motion_cfg, seed=int(tseed)))
            trajs[orient] = traj
            s, m = apply_motion(vol, mask, traj, orient, slice_thickness_mm)
        stacks.append((s, m, orient))
    return TrialStacks(int(trial_seed), free, stacks, trajs, still)


def _outcome(trial: TrialStacks, cfg: AssessConfig, workers) -> TrialOutcome:
    selected, reports = select_reference(trial.stacks, cfg, workers=workers)
    mis = [r.mi for r in reports]
    tie = mis.count(min(mis)) > 1
    return TrialOutcome(trial.trial_seed, trial.motion_free_id, selected, tuple(reports),
                        ambiguous=tie or trial.still)


def run_trial_suite(
    phantom_seeds,
    motion_cfg: RandomMotionConfig = RandomMotionConfig(),
    assess_cfg: AssessConfig = AssessConfig(),
    n_trials: int | None = None,
    size: int = 64,
    slice_thickness_mm: float = 2.0,
    workers: int | None = 1,
) -> list[TrialOutcome]:
    """One :class:`TrialOutcome` per trial; trial i uses ``phantom_seeds[i]``."""
    return run_method_suites(phantom_seeds, motion_cfg, [assess_cfg], n_trials, size,
                             slice_thickness_mm, workers)[assess_cfg.method]


def run_method_suites(
    phantom_seeds,
    motion_cfg: RandomMotionConfig,
    assess_cfgs,
    n_trials: int | None = None,
    size: int = 64,
    slice_thickness_mm: float = 2.0,
    workers: int | None = 1,
) -> dict[Method, list[TrialOutcome]]:
    """Score several methods on the same simulated trials."""
    seeds = list(phantom_seeds)
    n_trials = len(seeds) if n_trials is None else int(n_trials)
    if n_trials < 1:
        raise EmptyInput("n_trials must be >= 1")
    if len(seeds) < n_trials:
        raise EmptyInput(f"{n_trials} trials requested but only {len(seeds)} seeds given")
    out = {cfg.method: [] for cfg in assess_cfgs}
    for i in range(n_trials):
        try:
            trial = build_trial(seeds[i], motion_cfg, size, slice_thickness_mm)
            for cfg in assess_cfgs:
                out[cfg.method].append(_outcome(trial, cfg, workers))
        except Exception as exc:
            raise TrialError(i, exc) from exc
    return out


def ordering_inversions(outcomes: dict[Method, list[TrialOutcome]]) -> list[dict]:
    """Trials where a lower-ranked method succeeded but a higher-ranked one failed.

    The expected order is CP, then SVD-RSS, then SVD-FS.
    """
    order = [m for m in (Method.CP, Method.SVD_RSS, Method.SVD_FS) if m in outcomes]
    inversions = []
    n = min(len(v) for v in outcomes.values())
    for i in range(n):
        for hi, lo in zip(order, order[1:]):
            if outcomes[lo][i].success and not outcomes[hi][i].success:
                inversions.append({"trial": i, "trial_seed": outcomes[hi][i].trial_seed,
                                   "better": hi.value, "worse": lo.value})
    return inversions


@dataclass(frozen=True)
class RankPoint:
    rank: int
    rmi: float
    elapsed_ms: float


def rank_sweep(before, after, ranks, cfg: AssessConfig = AssessConfig()) -> list[RankPoint]:
    """RMI of ``after`` against ``before`` for each rank in ascending order.

    ``before`` and ``after`` are (Volume, Mask) pairs. Each rank is an
    independent assessment of both stacks; ``elapsed_ms`` is the assessment
    time of ``after`` at that rank.
    """
    ranks = sorted(int(r) for r in ranks)
    if not ranks:
        raise EmptyInput("no ranks given")
    out = []
    for r in ranks:
        c = replace(cfg, rank=r)
        a = assess(*after, c)
        out.append(RankPoint(r, rmi(a.mi, assess(*before, c).mi), a.elapsed_ms))
    return out
