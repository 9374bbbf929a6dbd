"""Posterior over the hyperparameter, entropies, and information gain.

Information gain of a scenario set ``A`` about a target (the hyperparameter
sigma, or the rate of one hyperplane) is ``H(target) - E_X[H(target | X_A)]``
where the expectation runs over the prior predictive of ``X_A``: the set is
scored before any of its scenarios is run.

The expectation is estimated by Monte Carlo. Each sampled dataset is scored
with an exact grid posterior, and sampling proceeds in batches until the
normal-approximation confidence half-width drops below ``abs_error``.
Sampled datasets come from a :class:`PredictiveBank`, which draws every
scenario of the space at once so that several candidate sets can be scored
on the same draws (common random numbers).

For toy models, :func:`exact_conditional_entropy` enumerates the whole count
support instead.
"""
from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm, poisson

from .hier_model import HierModel, draw_prior_predictive
from .scenario_space import Observation, ScenarioSpace, group_counts

__all__ = [
    "PosteriorGrid",
    "GainEstimate",
    "SamplingCapReached",
    "PredictiveBank",
    "posterior_sigma",
    "entropy",
    "prior_entropy",
    "expected_conditional_entropy",
    "information_gain",
    "information_gain_hyperplane",
    "exact_conditional_entropy",
    "exact_information_gain",
    "resolve_target",
    "z_value",
]

DEFAULT_CONFIDENCE = 0.90
DEFAULT_ABS_ERROR = 0.1
DEFAULT_MAX_SAMPLES = 2000
DEFAULT_BATCH_SIZE = 50

# Enumeration guard for exact (toy-model) computations.
_MAX_OUTCOMES = 200_000


class SamplingCapReached(RuntimeError):
    """Raised in strict mode when ``max_samples`` is hit before ``abs_error``."""


@dataclass(frozen=True)
class PosteriorGrid:
    sigma_points: np.ndarray
    mass: np.ndarray

    def mean(self) -> float:
        return float(np.dot(self.sigma_points, self.mass))


@dataclass(frozen=True)
class GainEstimate:
    """Monte-Carlo estimate in nats, with its confidence half-width.

    ``capped`` is set when sampling stopped at ``max_samples`` before the
    requested precision was reached.
    """

    mean: float
    ci_halfwidth: float
    confidence: float
    n_samples: int
    capped: bool = False

    @property
    def lo(self) -> float:
        return self.mean - self.ci_halfwidth

    @property
    def hi(self) -> float:
        return self.mean + self.ci_halfwidth

    @classmethod
    def exact(cls, value: float, confidence: float = DEFAULT_CONFIDENCE) -> "GainEstimate":
        return cls(float(value), 0.0, confidence, 1)


def z_value(confidence: float) -> float:
    """Two-sided normal quantile for a central interval at ``confidence``."""
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    return float(norm.ppf(0.5 + 0.5 * confidence))


def entropy(p: PosteriorGrid | np.ndarray) -> float:
    mass = np.asarray(p.mass if isinstance(p, PosteriorGrid) else p, dtype=float)
    nz = mass[mass > 0]
    return float(-np.sum(nz * np.log(nz)))


def _entropy_from_log(logp: np.ndarray) -> np.ndarray:
    """Row-wise entropy of normalized log-mass arrays (last axis)."""
    p = np.exp(logp)
    with np.errstate(invalid="ignore"):
        terms = np.where(p > 0, p * logp, 0.0)
    return -terms.sum(axis=-1)


def _normalize(logp: np.ndarray) -> np.ndarray:
    z = logsumexp(logp, axis=-1, keepdims=True)
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("posterior has no mass on the sigma grid; check grid configuration")
    return logp - z


def resolve_target(space: ScenarioSpace, target) -> int | None:
    """Normalize an objective to ``None`` (sigma) or a hyperplane level index.

    Accepts ``"sigma"``, ``"hyperplane:<level>"``, a level name, or a level index.
    """
    if target is None or target == "sigma":
        return None
    levels = space.schema.hyperplane_levels
    if isinstance(target, (int, np.integer)) and not isinstance(target, bool):
        if not 0 <= int(target) < len(levels):
            raise ValueError(f"hyperplane index {target} out of range")
        return int(target)
    name = str(target)
    if name.startswith("hyperplane:"):
        name = name.split(":", 1)[1]
    if name not in levels:
        raise ValueError(f"unknown hyperplane level {name!r}; known: {list(levels)}")
    return levels.index(name)


def _group_stats(grouped: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    n = np.array([len(c) for c in grouped], dtype=np.int64)
    s = np.array([sum(int(x) for x in c) for c in grouped], dtype=np.int64)
    return n, s


def _log_posterior_sigma(model: HierModel, n_vec: np.ndarray, sums: np.ndarray) -> tuple[np.ndarray, list]:
    """Batched log posterior over sigma from per-group sufficient statistics.

    ``sums`` has shape ``(batch, groups)``. Also returns the per-group
    likelihood rows, which the hyperplane target reuses.
    """
    batch = sums.shape[0]
    logp = np.broadcast_to(model.log_prior_sigma, (batch, model.n_sigma)).copy()
    rows = []
    for g, n in enumerate(n_vec):
        if n == 0:
            rows.append(None)
            continue
        r = model.stat_rows(int(n), sums[:, g])
        logp += r
        rows.append(r)
    return _normalize(logp), rows


def _log_posterior_rate(model, log_post_sigma, rows, n: int, sums: np.ndarray, chunk: int = 8) -> np.ndarray:
    """Batched marginal log posterior of one hyperplane's rate."""
    b = model.rate_grid.points
    out = np.empty((sums.shape[0], model.n_rate))
    for start in range(0, sums.shape[0], chunk):
        sl = slice(start, start + chunk)
        ll = sums[sl, None] * model.log_rates[None, :] - n * b[None, :]
        cond = model.log_cond[None, :, :] + ll[:, None, :]
        if rows is not None:
            cond = cond - rows[sl][:, :, None]
        out[sl] = logsumexp(log_post_sigma[sl][:, :, None] + cond, axis=1)
    return _normalize(out)


def _batch_entropies(model: HierModel, n_vec: np.ndarray, sums: np.ndarray, target: int | None) -> np.ndarray:
    log_post, rows = _log_posterior_sigma(model, n_vec, sums)
    if target is None:
        return _entropy_from_log(log_post)
    log_rate = _log_posterior_rate(model, log_post, rows[target], int(n_vec[target]), sums[:, target])
    return _entropy_from_log(log_rate)


def prior_entropy(model: HierModel, target: int | None = None) -> float:
    if target is None:
        return float(_entropy_from_log(model.log_prior_sigma))
    return float(_entropy_from_log(model.log_prior_rate()))


def posterior_sigma(observations: Iterable[Observation], space: ScenarioSpace, model: HierModel) -> PosteriorGrid:
    """Grid posterior of sigma given observed counts (order-independent)."""
    grouped = group_counts(observations, space)
    n_vec, s_vec = _group_stats(grouped)
    log_post, _ = _log_posterior_sigma(model, n_vec, s_vec[None, :])
    mass = np.exp(log_post[0])
    mass /= mass.sum()
    return PosteriorGrid(model.sigma_grid.points, mass)


def _key_from(rng) -> int:
    if isinstance(rng, (int, np.integer)) and not isinstance(rng, bool):
        return int(rng)
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63))
    raise TypeError("rng must be a numpy Generator or an integer seed")


class PredictiveBank:
    """Lazily drawn batches of full prior-predictive datasets.

    Batch ``k`` is drawn from its own seed derived from ``(key, k)``, so the
    content of the bank depends only on the key and the batch size, never on
    how many batches were requested or by which worker.
    """

    def __init__(self, space: ScenarioSpace, model: HierModel, rng, batch_size: int = DEFAULT_BATCH_SIZE):
        if batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        self.space = space
        self.model = model
        self.key = _key_from(rng)
        self.batch_size = int(batch_size)
        self.n_groups = len(space.schema.hyperplane_levels)
        self.hyperplane_of = np.asarray(space.hyperplane_indices(), dtype=np.int64)
        self._batches: list[np.ndarray] = []
        self._lock = threading.Lock()

    def batch(self, k: int) -> np.ndarray:
        """Counts of batch ``k``, shape ``(batch_size, len(space))``."""
        with self._lock:
            while len(self._batches) <= k:
                idx = len(self._batches)
                rng = np.random.default_rng(np.random.SeedSequence(self.key, spawn_key=(idx,)))
                _, _, counts = draw_prior_predictive(
                    self.model, self.n_groups, self.hyperplane_of, self.batch_size, rng
                )
                counts.flags.writeable = False
                self._batches.append(counts)
            return self._batches[k]

    def columns(self, candidate_ids) -> tuple[np.ndarray, np.ndarray]:
        """Space positions of the candidates and their per-group indicator matrix."""
        cols = np.array([self.space.index_of(i) for i in candidate_ids], dtype=np.int64)
        onehot = np.zeros((cols.size, self.n_groups), dtype=np.int64)
        onehot[np.arange(cols.size), self.hyperplane_of[cols]] = 1
        return cols, onehot


def _check_ids(candidate_ids, space: ScenarioSpace) -> list[int]:
    ids = list(dict.fromkeys(candidate_ids))
    for i in ids:
        if i not in space:
            raise KeyError(f"unknown scenario id {i}")
    return ids


def expected_conditional_entropy(
    candidate_ids,
    space: ScenarioSpace,
    model: HierModel,
    confidence: float = DEFAULT_CONFIDENCE,
    abs_error: float = DEFAULT_ABS_ERROR,
    rng=None,
    max_samples: int = DEFAULT_MAX_SAMPLES,
    *,
    target=None,
    batch_size: int = DEFAULT_BATCH_SIZE,
    strict: bool = False,
    bank: PredictiveBank | None = None,
) -> GainEstimate:
    """Monte-Carlo estimate of ``E_X[H(target | X_A)]`` with a confidence interval.

    Either ``rng`` or a shared ``bank`` must be given. Sampling stops at the
    first batch boundary where the half-width is at most ``abs_error``, or at
    ``max_samples`` (then ``capped`` is set, or :class:`SamplingCapReached`
    is raised when ``strict``).
    """
    z = z_value(confidence)
    if not abs_error > 0:
        raise ValueError("abs_error must be > 0")
    tgt = resolve_target(space, target)
    ids = _check_ids(candidate_ids, space)
    if not ids:
        return GainEstimate(prior_entropy(model, tgt), 0.0, confidence, 1)
    if bank is None:
        if rng is None:
            raise ValueError("an explicit rng (or bank) is required")
        bank = PredictiveBank(space, model, rng, batch_size)
    if max_samples < bank.batch_size:
        raise ValueError("max_samples must be at least one batch")

    cols, onehot = bank.columns(ids)
    n_vec = onehot.sum(axis=0)
    values = []
    n = 0
    k = 0
    while True:
        counts = bank.batch(k)[:, cols]
        values.append(_batch_entropies(model, n_vec, counts @ onehot, tgt))
        k += 1
        n += counts.shape[0]
        h = np.concatenate(values)
        mean = float(h.mean())
        half = float(z * h.std(ddof=1) / math.sqrt(n))
        if half <= abs_error:
            return GainEstimate(mean, half, confidence, n)
        if n + bank.batch_size > max_samples:
            if strict:
                raise SamplingCapReached(
                    f"half-width {half:.4f} > {abs_error} after {n} samples (max_samples={max_samples})"
                )
            return GainEstimate(mean, half, confidence, n, capped=True)


def information_gain(
    candidate_ids,
    space: ScenarioSpace,
    model: HierModel,
    confidence: float = DEFAULT_CONFIDENCE,
    abs_error: float = DEFAULT_ABS_ERROR,
    rng=None,
    max_samples: int = DEFAULT_MAX_SAMPLES,
    **kwargs,
) -> GainEstimate:
    """``I(target; X_A) = H(target) - E[H(target | X_A)]``; sigma by default."""
    tgt = resolve_target(space, kwargs.get("target"))
    ce = expected_conditional_entropy(
        candidate_ids, space, model, confidence, abs_error, rng, max_samples, **kwargs
    )
    return GainEstimate(
        prior_entropy(model, tgt) - ce.mean, ce.ci_halfwidth, ce.confidence, ce.n_samples, ce.capped
    )


def information_gain_hyperplane(
    rate_index,
    candidate_ids,
    space: ScenarioSpace,
    model: HierModel,
    confidence: float = DEFAULT_CONFIDENCE,
    abs_error: float = DEFAULT_ABS_ERROR,
    rng=None,
    max_samples: int = DEFAULT_MAX_SAMPLES,
    **kwargs,
) -> GainEstimate:
    """Information gain about the rate of one hyperplane (level name or index)."""
    return information_gain(
        candidate_ids, space, model, confidence, abs_error, rng, max_samples,
        target=resolve_target(space, rate_index), **kwargs,
    )


# -- exact enumeration ---------------------------------------------------------


def _log_clamped_pmf(model: HierModel) -> np.ndarray:
    """``[x, r]`` log-probability of a clamped count x in 0..count_cap given rate_r."""
    cap = model.count_cap
    b = model.rate_grid.points
    x = np.arange(cap + 1)
    out = poisson.logpmf(x[:, None], b[None, :])
    out[cap] = poisson.logsf(cap - 1, b)
    return out


def _enumerate(ids: list[int], space: ScenarioSpace, model: HierModel):
    """All clamped outcomes of the scenarios in ``ids`` with their log-probabilities."""
    cap = model.count_cap
    m = (cap + 1) ** len(ids)
    if m > _MAX_OUTCOMES:
        raise ValueError(
            f"exact enumeration over {m} outcomes exceeds the limit of {_MAX_OUTCOMES}; use a toy model"
        )
    n_groups = len(space.schema.hyperplane_levels)
    outcomes = np.array(list(itertools.product(range(cap + 1), repeat=len(ids))), dtype=np.int64)
    outcomes = outcomes.reshape(m, len(ids))
    hp = np.array([space.hyperplane_of(i) for i in ids], dtype=np.int64)
    log_pmf = _log_clamped_pmf(model)

    log_joint = np.broadcast_to(model.log_prior_sigma, (m, model.n_sigma)).copy()
    sums = np.zeros((m, n_groups), dtype=np.int64)
    for g in np.unique(hp):
        members = np.flatnonzero(hp == g)
        sums[:, g] = outcomes[:, members].sum(axis=1)
        ll = log_pmf[outcomes[:, members]].sum(axis=1)  # (m, R)
        log_joint += logsumexp(model.log_cond[None, :, :] + ll[:, None, :], axis=2)
    log_px = logsumexp(log_joint, axis=1)
    n_vec = np.bincount(hp, minlength=n_groups)
    return log_px, n_vec, sums


def exact_conditional_entropy(candidate_ids, space: ScenarioSpace, model: HierModel, target=None) -> float:
    """``E_X[H(target | X_A)]`` by enumerating every clamped count outcome.

    Outcomes are weighted by the same clamped prior predictive that the
    Monte-Carlo estimator samples from; posteriors use the Poisson likelihood.
    """
    tgt = resolve_target(space, target)
    ids = _check_ids(candidate_ids, space)
    if not ids:
        return prior_entropy(model, tgt)
    log_px, n_vec, sums = _enumerate(ids, space, model)
    h = np.empty(log_px.size)
    for start in range(0, log_px.size, 2048):
        sl = slice(start, start + 2048)
        h[sl] = _batch_entropies(model, n_vec, sums[sl], tgt)
    return float(np.sum(np.exp(log_px) * h))


def exact_information_gain(candidate_ids, space: ScenarioSpace, model: HierModel, target=None) -> float:
    tgt = resolve_target(space, target)
    return prior_entropy(model, tgt) - exact_conditional_entropy(candidate_ids, space, model, tgt)
