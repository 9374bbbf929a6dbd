"""Synthetic Table-I-shaped data, posterior predictive checks, method comparison."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .hier_model import HierModel
from .inference import (
    DEFAULT_ABS_ERROR,
    DEFAULT_BATCH_SIZE,
    DEFAULT_CONFIDENCE,
    DEFAULT_MAX_SAMPLES,
    GainEstimate,
    _group_stats,
    _key_from,
    _log_posterior_sigma,
    information_gain,
)
from .scenario_space import FeatureSchema, Observation, Scenario, ScenarioSpace, group_counts
from .selection import greedy_select, lhs_select, random_select, stopping_test

__all__ = [
    "SyntheticConfig",
    "generate_synthetic",
    "PPCReport",
    "posterior_predictive_check",
    "MethodResult",
    "ComparisonReport",
    "run_comparison",
    "stopping_index",
]

log = logging.getLogger(__name__)

DEFAULT_TRUE_RATES = (0.5, 0.8, 1.2, 1.6, 2.1, 2.7)
METHODS = ("greedy", "lhs", "random")


@dataclass(frozen=True)
class SyntheticConfig:
    n_hyperplanes: int = 6
    scenarios_per_hyperplane: int = 22
    true_rates: tuple[float, ...] | None = None
    traffic_levels: tuple[int, ...] = (10, 150)
    seed: int | None = None

    def __post_init__(self):
        if self.n_hyperplanes < 1 or self.scenarios_per_hyperplane < 1:
            raise ValueError("need at least one hyperplane and one scenario per hyperplane")
        if self.true_rates is not None:
            rates = tuple(float(r) for r in self.true_rates)
            if len(rates) != self.n_hyperplanes:
                raise ValueError(f"true_rates has {len(rates)} entries, expected {self.n_hyperplanes}")
            if any(not r > 0 for r in rates):
                raise ValueError("true_rates must be positive")
            object.__setattr__(self, "true_rates", rates)
        if not self.traffic_levels:
            raise ValueError("traffic_levels must not be empty")
        object.__setattr__(self, "traffic_levels", tuple(int(t) for t in self.traffic_levels))

    def rates(self) -> tuple[float, ...]:
        if self.true_rates is not None:
            return self.true_rates
        if self.n_hyperplanes == len(DEFAULT_TRUE_RATES):
            return DEFAULT_TRUE_RATES
        return tuple(np.round(np.linspace(0.5, 2.7, self.n_hyperplanes), 6))

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticConfig":
        known = {"n_hyperplanes", "scenarios_per_hyperplane", "true_rates", "traffic_levels", "seed"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        for key in ("true_rates", "traffic_levels"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        return cls(**data)

    def to_dict(self) -> dict:
        return {
            "n_hyperplanes": self.n_hyperplanes,
            "scenarios_per_hyperplane": self.scenarios_per_hyperplane,
            "true_rates": list(self.rates()),
            "traffic_levels": list(self.traffic_levels),
            "seed": self.seed,
        }


def synthetic_space(config: SyntheticConfig) -> ScenarioSpace:
    """Scenario space with features (traffic, town, route), one scenario per (town, route).

    Routes are numbered within each town. Traffic is assigned by route
    block: the first routes of every town get the lowest traffic level.
    """
    towns = tuple(f"Town{t + 1:02d}" for t in range(config.n_hyperplanes))
    routes = tuple(str(r + 1) for r in range(config.scenarios_per_hyperplane))
    traffic = tuple(str(t) for t in sorted(set(config.traffic_levels)))
    schema = FeatureSchema((("traffic", traffic), ("town", towns), ("route", routes)), "town")
    scenarios = []
    per = config.scenarios_per_hyperplane
    for t in range(config.n_hyperplanes):
        for r in range(per):
            level = r * len(traffic) // per
            scenarios.append(Scenario(t * per + r + 1, (level, t, r)))
    return ScenarioSpace(schema, tuple(scenarios))


def generate_synthetic(config: SyntheticConfig, rng: np.random.Generator | None = None):
    """Space plus one Poisson count per scenario at its town's true rate.

    ``rng`` defaults to a generator seeded from ``config.seed``.
    """
    if rng is None:
        if config.seed is None:
            raise ValueError("pass an rng or set config.seed")
        rng = np.random.default_rng(config.seed)
    space = synthetic_space(config)
    rates = np.asarray(config.rates())
    hp = np.asarray(space.hyperplane_indices())
    counts = rng.poisson(rates[hp])
    observations = [Observation(sid, int(c)) for sid, c in zip(space.ids, counts)]
    return space, observations


# -- posterior predictive check ---------------------------------------------------


@dataclass
class PPCReport:
    """Observed vs replicated count histograms.

    Bin ``k`` holds count value ``k`` for ``k <= max observed``; the last bin
    collects everything larger. Frequencies are fractions of scenarios.
    """

    bins: list[str]
    observed: np.ndarray
    replicated_mean: np.ndarray
    replicated_lo: np.ndarray
    replicated_hi: np.ndarray
    agree: np.ndarray
    band: float = 0.9
    n_replicates: int = 0

    @property
    def agreement_fraction(self) -> float:
        return float(np.mean(self.agree))

    def to_dict(self) -> dict:
        return {
            "band": self.band,
            "n_replicates": self.n_replicates,
            "agreement_fraction": self.agreement_fraction,
            "bins": [
                {
                    "bin": b,
                    "observed": float(o),
                    "replicated_mean": float(m),
                    "replicated_lo": float(lo),
                    "replicated_hi": float(hi),
                    "agree": bool(a),
                }
                for b, o, m, lo, hi, a in zip(
                    self.bins, self.observed, self.replicated_mean, self.replicated_lo, self.replicated_hi, self.agree
                )
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _sample_rows(log_mass: np.ndarray, rng) -> np.ndarray:
    cdf = np.cumsum(np.exp(log_mass), axis=-1)
    cdf[..., -1] = np.inf
    u = rng.random(log_mass.shape[:-1])
    return (cdf < u[..., None]).sum(axis=-1)


def posterior_predictive_check(
    observations,
    space: ScenarioSpace,
    model: HierModel,
    n_replicates: int = 500,
    rng: np.random.Generator | None = None,
    band: float = 0.9,
) -> PPCReport:
    """Replicate the observed dataset from the joint grid posterior of (sigma, rates)."""
    observations = list(observations)
    if not observations:
        raise ValueError("nothing to check: no observations")
    if rng is None:
        raise ValueError("an explicit rng is required")
    grouped = group_counts(observations, space)
    n_vec, s_vec = _group_stats(grouped)
    log_post, rows = _log_posterior_sigma(model, n_vec, s_vec[None, :])
    log_post = log_post[0]

    b = model.rate_grid.points
    # log P(b_r | sigma_j, group data), shape (groups, J, R)
    cond = np.empty((len(grouped), model.n_sigma, model.n_rate))
    for g, n in enumerate(n_vec):
        c = model.log_cond + (s_vec[g] * model.log_rates - n * b)[None, :]
        cond[g] = c - logsumexp(c, axis=1, keepdims=True)

    hp = np.array([space.hyperplane_of(o.scenario_id) for o in observations])
    obs_counts = np.array([o.count for o in observations])
    top = int(obs_counts.max())
    n_bins = top + 2

    j = _sample_rows(np.broadcast_to(log_post, (n_replicates, model.n_sigma)), rng)
    r = _sample_rows(cond[np.arange(len(grouped))[None, :], j[:, None]], rng)  # (reps, groups)
    reps = rng.poisson(b[r][:, hp])

    def hist(c):
        return np.bincount(np.minimum(c, top + 1), minlength=n_bins) / c.size

    observed = hist(obs_counts)
    rep_freq = np.stack([hist(x) for x in reps])
    tail = (1.0 - band) / 2.0
    lo = np.quantile(rep_freq, tail, axis=0)
    hi = np.quantile(rep_freq, 1.0 - tail, axis=0)
    agree = (observed >= lo - 1e-12) & (observed <= hi + 1e-12)
    labels = [str(k) for k in range(top + 1)] + [f">{top}"]
    return PPCReport(labels, observed, rep_freq.mean(axis=0), lo, hi, agree, band, n_replicates)


# -- comparison --------------------------------------------------------------------


def stopping_index(curve, confidence: float = DEFAULT_CONFIDENCE) -> int:
    """First set size whose gain increase over the previous size is not significant.

    ``curve[k-1]`` is the gain of a size-``k`` set; the empty set has gain 0.
    Returns ``len(curve)`` when the rule never fires.
    """
    prev = GainEstimate(0.0, 0.0, confidence, 1)
    for k, g in enumerate(curve, start=1):
        if not stopping_test(prev, g, confidence):
            return k
        prev = g
    return len(curve)


@dataclass
class MethodResult:
    name: str
    curves: list[list[GainEstimate]] = field(default_factory=list)
    selections: list[list[int]] = field(default_factory=list)
    stopping_indices: list[int] = field(default_factory=list)

    def means(self) -> np.ndarray:
        return np.array([[g.mean for g in c] for c in self.curves])

    def band(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        m = self.means()
        return m.mean(axis=0), m.min(axis=0), m.max(axis=0)

    @property
    def mean_stopping_index(self) -> float:
        return float(np.mean(self.stopping_indices))

    @property
    def final_gain(self) -> float:
        """Mean over runs of the gain at the largest evaluated set size."""
        return float(self.means()[:, -1].mean())

    def curve_csv(self) -> str:
        mean, lo, hi = self.band()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "gain_mean", "gain_min", "gain_max"])
        writer.writerow([0, 0.0, 0.0, 0.0])
        for k, (m, a, b) in enumerate(zip(mean, lo, hi), start=1):
            writer.writerow([k, repr(float(m)), repr(float(a)), repr(float(b))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        mean, lo, hi = self.band()
        return {
            "runs": [
                {
                    "selection": sel,
                    "stopping_index": idx,
                    "curve": [{"mean": g.mean, "ci": g.ci_halfwidth, "n_samples": g.n_samples} for g in c],
                }
                for sel, idx, c in zip(self.selections, self.stopping_indices, self.curves)
            ],
            "mean_stopping_index": self.mean_stopping_index,
            "final_gain": self.final_gain,
            "band_mean": [float(x) for x in mean],
            "band_min": [float(x) for x in lo],
            "band_max": [float(x) for x in hi],
        }


@dataclass
class ComparisonReport:
    methods: dict[str, MethodResult]
    max_size: int
    n_runs: int
    confidence: float
    abs_error: float

    def to_dict(self) -> dict:
        return {
            "max_size": self.max_size,
            "n_runs": self.n_runs,
            "confidence": self.confidence,
            "abs_error": self.abs_error,
            "methods": {k: v.to_dict() for k, v in self.methods.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def plateau_spread(self) -> float:
        finals = [m.final_gain for m in self.methods.values()]
        return float(max(finals) - min(finals))


def run_comparison(
    space_or_config,
    model: HierModel,
    n_runs: int = 5,
    rng=None,
    *,
    max_size: int = 20,
    confidence: float = DEFAULT_CONFIDENCE,
    abs_error: float = DEFAULT_ABS_ERROR,
    max_samples: int = DEFAULT_MAX_SAMPLES,
    batch_size: int = DEFAULT_BATCH_SIZE,
    workers: int = 1,
    methods=METHODS,
) -> ComparisonReport:
    """Greedy vs Latin hypercube vs random, ``n_runs`` seeded runs each.

    Every method yields a gain curve over set sizes ``1..max_size``. Greedy
    curves follow the greedy trace (run past its plateau); random curves are
    prefixes of one random order; LHS designs are not nested, so each size
    gets its own design. Stopping indices come from :func:`stopping_index`.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if isinstance(space_or_config, SyntheticConfig):
        space, _ = generate_synthetic(space_or_config)
    else:
        space = space_or_config
    max_size = min(int(max_size), len(space))
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    key = _key_from(rng)

    def gen(run, tag, *extra):
        return np.random.default_rng(np.random.SeedSequence(key, spawn_key=(run, METHODS.index(tag), *extra)))

    def gain(ids, run, tag, k):
        return information_gain(
            ids, space, model, confidence, abs_error, gen(run, tag, k, 1), max_samples, batch_size=batch_size
        )

    results = {m: MethodResult(m) for m in methods}
    for run in range(n_runs):
        if "greedy" in methods:
            trace = greedy_select(
                space, model, "sigma", confidence, abs_error, gen(run, "greedy"), max_size,
                stop_on_plateau=False, max_samples=max_samples, batch_size=batch_size, workers=workers,
            )
            curve = trace.gains
            res = results["greedy"]
            res.curves.append(curve)
            res.selections.append(trace.selected)
            res.stopping_indices.append(stopping_index(curve, confidence))
        if "lhs" in methods:
            curve, sels = [], []
            for k in range(1, max_size + 1):
                ids = lhs_select(space, k, gen(run, "lhs", k, 0))
                sels.append(ids)
                curve.append(gain(ids, run, "lhs", k))
            res = results["lhs"]
            res.curves.append(curve)
            res.selections.append(sels[-1])
            res.stopping_indices.append(stopping_index(curve, confidence))
        if "random" in methods:
            order = random_select(space, max_size, gen(run, "random"))
            curve = [gain(order[:k], run, "random", k) for k in range(1, max_size + 1)]
            res = results["random"]
            res.curves.append(curve)
            res.selections.append(order)
            res.stopping_indices.append(stopping_index(curve, confidence))
        log.info(
            "run %d: stopping indices %s", run, {m: r.stopping_indices[-1] for m, r in results.items()}
        )
    return ComparisonReport(results, max_size, n_runs, confidence, abs_error)
