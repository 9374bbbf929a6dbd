"""Greedy scenario selection with a plateau stopping rule, plus baselines.

The greedy loop adds, at every step, the scenario whose addition maximizes
the estimated information gain of the accumulated set. All candidates of a
step are scored on one shared :class:`~plane_sample.inference.PredictiveBank`
so their comparison is not dominated by independent Monte-Carlo noise; each
step draws a fresh bank, and the chosen set is then re-scored on an
independent bank for the trace. Selection stops once the gain increase is no longer
significant (:func:`stopping_test`), when the budget is used up, or when the
space is exhausted.
"""
from __future__ import annotations

import csv
import heapq
import io
import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .hier_model import HierModel
from .inference import (
    DEFAULT_ABS_ERROR,
    DEFAULT_BATCH_SIZE,
    DEFAULT_CONFIDENCE,
    DEFAULT_MAX_SAMPLES,
    GainEstimate,
    PredictiveBank,
    exact_information_gain,
    information_gain,
    resolve_target,
    z_value,
)
from .scenario_space import FeatureSchema, ScenarioSpace

__all__ = [
    "Step",
    "SelectionTrace",
    "greedy_select",
    "stopping_test",
    "lhs_select",
    "lhs_draws",
    "random_select",
    "brute_force_optimal",
]

log = logging.getLogger(__name__)

BRUTE_FORCE_CAP = 100_000


@dataclass(frozen=True)
class Step:
    scenario_id: int
    gain: GainEstimate
    marginal_gain: float

    @property
    def n_samples(self) -> int:
        return self.gain.n_samples


@dataclass
class SelectionTrace:
    steps: list[Step] = field(default_factory=list)
    stopped_reason: str = "exhausted"
    budget: int | None = None
    plateau_step: int | None = None

    @property
    def selected(self) -> list[int]:
        return [s.scenario_id for s in self.steps]

    @property
    def gains(self) -> list[GainEstimate]:
        return [s.gain for s in self.steps]

    def to_dict(self) -> dict:
        return {
            "steps": [
                {
                    "step": k,
                    "scenario_id": s.scenario_id,
                    "gain_mean": s.gain.mean,
                    "gain_ci": s.gain.ci_halfwidth,
                    "n_samples": s.gain.n_samples,
                    "marginal_gain": s.marginal_gain,
                    "capped": s.gain.capped,
                }
                for k, s in enumerate(self.steps, start=1)
            ],
            "stopped_reason": self.stopped_reason,
            "budget": self.budget,
            "plateau_step": self.plateau_step,
            "confidence": self.steps[0].gain.confidence if self.steps else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "SelectionTrace":
        conf = data.get("confidence") or DEFAULT_CONFIDENCE
        steps = []
        for row in data["steps"]:
            g = GainEstimate(row["gain_mean"], row["gain_ci"], conf, row["n_samples"], row.get("capped", False))
            steps.append(Step(row["scenario_id"], g, row.get("marginal_gain", math.nan)))
        return cls(steps, data["stopped_reason"], data.get("budget"), data.get("plateau_step"))

    def curve_csv(self) -> str:
        return curve_csv([s.gain for s in self.steps])


def curve_csv(gains: Sequence[GainEstimate]) -> str:
    """``step,gain_mean,gain_lo,gain_hi`` with the empty set as step 0."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "gain_mean", "gain_lo", "gain_hi"])
    writer.writerow([0, 0.0, 0.0, 0.0])
    for k, g in enumerate(gains, start=1):
        writer.writerow([k, repr(g.mean), repr(g.lo), repr(g.hi)])
    return buf.getvalue()


def stopping_test(prev: GainEstimate, curr: GainEstimate, confidence: float | None = None) -> bool:
    """True to continue: the one-sided lower bound on the gain increase is positive."""
    conf = curr.confidence if confidence is None else confidence
    z = z_value(conf)
    se_prev = prev.ci_halfwidth / z
    se_curr = curr.ci_halfwidth / z
    return (curr.mean - prev.mean) - z * math.sqrt(se_prev**2 + se_curr**2) > 0


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def greedy_select(
    space: ScenarioSpace,
    model: HierModel,
    objective="sigma",
    confidence: float = DEFAULT_CONFIDENCE,
    abs_error: float = DEFAULT_ABS_ERROR,
    rng: np.random.Generator | None = None,
    budget: int | None = None,
    *,
    exact: bool = False,
    stop_on_plateau: bool = True,
    max_samples: int = DEFAULT_MAX_SAMPLES,
    batch_size: int = DEFAULT_BATCH_SIZE,
    workers: int = 1,
    lazy: bool = False,
) -> SelectionTrace:
    """Greedy maximization of the information gain about ``objective``.

    ``objective`` is ``"sigma"`` or ``"hyperplane:<level>"``. Ties go to the
    smallest scenario id. With ``exact=True`` gains are enumerated exactly
    (toy models only) and ``rng`` is not needed. With
    ``stop_on_plateau=False`` the loop runs to the budget, but the step where
    the stopping rule first fired is still recorded as ``plateau_step``.

    ``lazy`` re-evaluates candidates in order of their stale marginal gains
    and stops at the first one that still dominates; with Monte-Carlo gains
    the lazy bound is only approximate, so it is off by default.
    """
    if len(space) == 0:
        raise ValueError("cannot select from an empty space")
    if budget is not None and budget < 0:
        raise ValueError("budget must be nonnegative")
    target = resolve_target(space, objective)
    if not exact and rng is None:
        raise ValueError("an explicit rng is required for Monte-Carlo gains")

    trace = SelectionTrace(budget=budget)
    chosen: list[int] = []
    prev = GainEstimate(0.0, 0.0, confidence, 1)
    all_ids = sorted(space.ids)
    stale: dict[int, float] = {}
    chosen_set: set[int] = set()

    while True:
        if budget is not None and len(chosen) >= budget:
            trace.stopped_reason = "budget"
            break
        remaining = [i for i in all_ids if i not in chosen_set]
        if not remaining:
            trace.stopped_reason = "exhausted"
            break

        if exact:
            def score(e, _base=list(chosen)):
                return GainEstimate.exact(exact_information_gain(_base + [e], space, model, target), confidence)
        else:
            bank = PredictiveBank(space, model, rng, batch_size)

            def score(e, _base=list(chosen), _bank=bank):
                return information_gain(
                    _base + [e], space, model, confidence, abs_error, None, max_samples,
                    target=target, bank=_bank,
                )

        if lazy and stale:
            best_id, best = _lazy_pick(remaining, stale, score, prev)
        else:
            results = _map(score, remaining, workers)
            best_id, best = None, None
            for e, g in zip(remaining, results):
                stale[e] = g.mean - prev.mean
                if best is None or g.mean > best.mean:
                    best_id, best = e, g

        chosen.append(best_id)
        chosen_set.add(best_id)
        if not exact:
            # The argmax of shared-draw estimates is biased upward; the trace
            # and the stopping rule use an independent re-estimate of the set.
            best = information_gain(
                chosen, space, model, confidence, abs_error, None, max_samples,
                target=target, bank=PredictiveBank(space, model, rng, batch_size),
            )
        step = Step(best_id, best, best.mean - prev.mean)
        trace.steps.append(step)
        log.debug("step %d: scenario %d gain %.4f +/- %.4f", len(chosen), best_id, best.mean, best.ci_halfwidth)

        if not stopping_test(prev, best, confidence):
            if trace.plateau_step is None:
                trace.plateau_step = len(chosen)
            if stop_on_plateau:
                trace.stopped_reason = "plateau"
                break
        prev = best
    return trace


def _lazy_pick(remaining, stale, score, prev):
    heap = [(-stale.get(e, math.inf), e) for e in remaining]
    heapq.heapify(heap)
    while True:
        _, e = heapq.heappop(heap)
        g = score(e)
        stale[e] = g.mean - prev.mean
        if not heap or stale[e] >= -heap[0][0]:
            return e, g
        heapq.heappush(heap, (-stale[e], e))


# -- baselines -----------------------------------------------------------------


def lhs_draws(schema: FeatureSchema, budget: int, rng: np.random.Generator) -> np.ndarray:
    """Latin-hypercube draws of level indices, shape ``(budget, n_features)``.

    Per feature the ``L`` levels are cut into ``budget`` contiguous strata of
    near-equal size (each stratum a single level, repeated as evenly as
    possible, when ``budget > L``). Strata are assigned to samples by a random
    permutation and a level is drawn uniformly inside each stratum.
    """
    out = np.empty((budget, len(schema.features)), dtype=np.int64)
    strata = np.arange(budget)
    for f, n_levels in enumerate(schema.level_counts):
        lo = strata * n_levels // budget
        hi = np.maximum((strata + 1) * n_levels // budget, lo + 1)
        perm = rng.permutation(budget)
        out[:, f] = rng.integers(lo[perm], hi[perm])
    return out


def lhs_select(space: ScenarioSpace, budget: int, rng: np.random.Generator) -> list[int]:
    """Latin-hypercube selection mapped onto existing scenarios.

    Every drawn coordinate tuple is replaced by the nearest not-yet-selected
    scenario in L1 distance on level indices (ties to the smallest id).
    """
    if budget > len(space):
        raise ValueError(f"budget {budget} exceeds space size {len(space)}")
    if budget <= 0:
        return []
    draws = lhs_draws(space.schema, budget, rng)
    by_id = sorted(space.scenarios, key=lambda s: s.id)
    ids = np.array([s.id for s in by_id])
    coords = np.array([s.coords for s in by_id], dtype=np.int64)
    free = np.ones(ids.size, dtype=bool)
    chosen = []
    for d in draws:
        dist = np.abs(coords - d).sum(axis=1).astype(float)
        dist[~free] = np.inf
        k = int(np.argmin(dist))  # first minimum is the smallest id
        free[k] = False
        chosen.append(int(ids[k]))
    return chosen


def random_select(space: ScenarioSpace, budget: int, rng: np.random.Generator) -> list[int]:
    """Uniform selection without replacement, in draw order."""
    if budget > len(space):
        raise ValueError(f"budget {budget} exceeds space size {len(space)}")
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    ids = sorted(space.ids)
    return [int(ids[k]) for k in rng.permutation(len(ids))[:budget]]


def brute_force_optimal(space: ScenarioSpace, model: HierModel, budget: int, objective="sigma"):
    """Exhaustive search for the size-``budget`` set with the largest exact gain.

    Returns ``(ids, gain)``; the lexicographically first set wins ties.
    """
    if not 0 <= budget <= len(space):
        raise ValueError(f"budget must be in [0, {len(space)}]")
    if math.comb(len(space), budget) > BRUTE_FORCE_CAP:
        raise ValueError(
            f"C({len(space)}, {budget}) = {math.comb(len(space), budget)} sets exceeds the cap of {BRUTE_FORCE_CAP}"
        )
    target = resolve_target(space, objective)
    best, best_gain = None, -math.inf
    for subset in itertools.combinations(sorted(space.ids), budget):
        g = exact_information_gain(list(subset), space, model, target)
        if g > best_gain:
            best, best_gain = subset, g
    return tuple(best), float(best_gain)
