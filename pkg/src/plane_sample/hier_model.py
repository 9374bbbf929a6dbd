"""Three-level Poisson / half-normal hierarchical model on quadrature grids.

Generative structure, for scenario ``i`` in hyperplane ``p``::

    sigma      ~ HalfNormal(hyperprior_scale)
    b_p | sigma ~ HalfNormal(sigma)
    X_i | b_p   ~ Poisson(b_p)

Both continuous parameters live on log-spaced grids. The grid weights turn
the densities into discrete probability masses, so the model that is
sampled from is exactly the model that inference conditions on. All
probability arithmetic is in log space, entropies are in nats.
"""
from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .scenario_space import ScenarioSpace

__all__ = [
    "Grid",
    "HierModel",
    "halfnormal_logpdf",
    "poisson_logpmf",
    "group_log_marginal",
    "log_likelihood_sigma",
    "prior_predictive_sample",
    "PriorDraw",
    "load_model",
    "DEFAULT_MODEL_CONFIG",
]

_LOG_HN_CONST = math.log(2.0) - 0.5 * math.log(2.0 * math.pi)

# Gregory end corrections for the trapezoid rule, O(h^4) for smooth integrands.
_END_WEIGHTS = np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0])

DEFAULT_MODEL_CONFIG = {
    "hyperprior_scale": 5.0,
    "sigma_grid": {"min": 0.05, "max": 20.0, "n": 200},
    "rate_grid": {"min": 0.01, "max": 40.0, "n": 400},
    "count_cap": 50,
}


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing positive points with positive quadrature weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).copy()
        wts = np.asarray(self.weights, dtype=float).copy()
        if pts.ndim != 1 or pts.shape != wts.shape or pts.size == 0:
            raise ValueError("grid points and weights must be non-empty 1-d arrays of equal length")
        if np.any(pts <= 0) or np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be positive and strictly increasing")
        if np.any(wts <= 0) or not np.all(np.isfinite(wts)):
            raise ValueError("grid weights must be positive and finite")
        pts.flags.writeable = False
        wts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @classmethod
    def log_spaced(cls, lo: float, hi: float, n: int) -> "Grid":
        """Log-spaced grid with end-corrected trapezoid weights.

        The rule integrates ``f(b) db = f(e^u) e^u du`` with a trapezoid in
        ``u``; for ``n >= 6`` the three outermost weights on each side get
        Gregory corrections.
        """
        if not 0 < lo < hi:
            raise ValueError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
        if n < 2:
            raise ValueError("a log-spaced grid needs at least 2 points")
        u = np.linspace(math.log(lo), math.log(hi), int(n))
        h = u[1] - u[0]
        w = np.ones(u.size)
        if u.size >= 6:
            w[:3] = _END_WEIGHTS
            w[-3:] = _END_WEIGHTS[::-1]
        else:
            w[0] = w[-1] = 0.5
        pts = np.exp(u)
        pts[0], pts[-1] = lo, hi  # exact endpoints so configs round-trip
        return cls(pts, w * h * pts)

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash((self.points.tobytes(), self.weights.tobytes()))


def halfnormal_logpdf(x, scale):
    """Log density of the half-normal with the given scale (std of the normal)."""
    x = np.asarray(x, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if np.any(x <= 0) or np.any(scale <= 0):
        raise ValueError("halfnormal_logpdf requires x > 0 and scale > 0")
    out = _LOG_HN_CONST - np.log(scale) - 0.5 * (x / scale) ** 2
    return float(out) if out.ndim == 0 else out


def poisson_logpmf(k, rate):
    k = np.asarray(k)
    rate = np.asarray(rate, dtype=float)
    if np.any(rate <= 0):
        raise ValueError("poisson_logpmf requires rate > 0")
    if np.any(k < 0):
        raise ValueError("poisson_logpmf requires k >= 0")
    out = k * np.log(rate) - rate - gammaln(k + 1.0)
    return float(out) if out.ndim == 0 else out


class HierModel:
    """Grid-discretized hierarchical model.

    ``log_cond[j, r]`` is log P(b = rate_r | sigma = sigma_j), normalized
    over the rate grid; ``log_prior_sigma[j]`` is the normalized hyperprior
    mass. Per-group log-likelihood rows keyed by the sufficient statistics
    (number of observations, sum of counts) are cached lazily; the model is
    otherwise immutable.
    """

    def __init__(
        self,
        hyperprior_scale: float = 5.0,
        sigma_grid: Grid | None = None,
        rate_grid: Grid | None = None,
        count_cap: int = 50,
    ):
        if not hyperprior_scale > 0:
            raise ValueError("hyperprior_scale must be > 0")
        if int(count_cap) < 0 or int(count_cap) != count_cap:
            raise ValueError("count_cap must be a nonnegative integer")
        cfg = DEFAULT_MODEL_CONFIG
        self.hyperprior_scale = float(hyperprior_scale)
        self.sigma_grid = sigma_grid or Grid.log_spaced(
            cfg["sigma_grid"]["min"], cfg["sigma_grid"]["max"], cfg["sigma_grid"]["n"]
        )
        self.rate_grid = rate_grid or Grid.log_spaced(
            cfg["rate_grid"]["min"], cfg["rate_grid"]["max"], cfg["rate_grid"]["n"]
        )
        self.count_cap = int(count_cap)

        s = self.sigma_grid.points
        b = self.rate_grid.points
        lp = halfnormal_logpdf(s, self.hyperprior_scale) + np.log(self.sigma_grid.weights)
        self.log_prior_sigma = lp - logsumexp(lp)
        lc = halfnormal_logpdf(b[None, :], s[:, None]) + np.log(self.rate_grid.weights)[None, :]
        self.log_cond = lc - logsumexp(lc, axis=1, keepdims=True)
        self.log_rates = np.log(b)
        for arr in (self.log_prior_sigma, self.log_cond, self.log_rates):
            arr.flags.writeable = False

        self._rows: dict[int, np.ndarray] = {}
        self._have: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_config(cls, config: dict) -> "HierModel":
        cfg = {**DEFAULT_MODEL_CONFIG, **config}
        unknown = set(config) - set(DEFAULT_MODEL_CONFIG)
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")

        def grid(spec):
            if not isinstance(spec, dict) or set(spec) != {"min", "max", "n"}:
                raise ValueError(f"grid spec must have keys min, max, n; got {spec!r}")
            return Grid.log_spaced(float(spec["min"]), float(spec["max"]), int(spec["n"]))

        return cls(
            hyperprior_scale=float(cfg["hyperprior_scale"]),
            sigma_grid=grid(cfg["sigma_grid"]),
            rate_grid=grid(cfg["rate_grid"]),
            count_cap=int(cfg["count_cap"]),
        )

    def to_config(self) -> dict:
        """Config dict, only meaningful for models built from log-spaced grids."""

        def spec(g: Grid):
            return {"min": float(g.points[0]), "max": float(g.points[-1]), "n": len(g)}

        return {
            "hyperprior_scale": self.hyperprior_scale,
            "sigma_grid": spec(self.sigma_grid),
            "rate_grid": spec(self.rate_grid),
            "count_cap": self.count_cap,
        }

    def __repr__(self):
        return (
            f"HierModel(hyperprior_scale={self.hyperprior_scale}, sigma_grid=<{len(self.sigma_grid)} pts>, "
            f"rate_grid=<{len(self.rate_grid)} pts>, count_cap={self.count_cap})"
        )

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        state["_rows"], state["_have"] = {}, {}
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    # -- derived quantities ---------------------------------------------------

    @property
    def n_sigma(self) -> int:
        return len(self.sigma_grid)

    @property
    def n_rate(self) -> int:
        return len(self.rate_grid)

    @property
    def prior_sigma(self) -> np.ndarray:
        return np.exp(self.log_prior_sigma)

    def log_prior_rate(self) -> np.ndarray:
        """Log marginal prior mass of one hyperplane rate on the rate grid."""
        return logsumexp(self.log_prior_sigma[:, None] + self.log_cond, axis=0)

    def log_cond_at(self, sigma: float) -> np.ndarray:
        """log P(b = rate_r | sigma) for an arbitrary sigma > 0."""
        lc = halfnormal_logpdf(self.rate_grid.points, float(sigma)) + np.log(self.rate_grid.weights)
        norm = logsumexp(lc)
        if not np.isfinite(norm):
            raise FloatingPointError(f"rate grid carries no mass at sigma={sigma}")
        return lc - norm

    def stat_rows(self, n: int, sums: np.ndarray) -> np.ndarray:
        """Cached per-group log-likelihood over the sigma grid.

        Row ``[k, j]`` is ``log sum_r P(b_r | sigma_j) b_r^S exp(-n b_r)`` for
        ``S = sums[k]``. This omits ``-sum log(x_i!)``, which does not depend
        on sigma and cancels in every posterior.
        """
        n = int(n)
        sums = np.asarray(sums, dtype=np.int64)
        if n == 0:
            return np.zeros((sums.size, self.n_sigma))
        with self._lock:
            need = int(sums.max()) + 1 if sums.size else 0
            rows = self._rows.get(n)
            have = self._have.get(n)
            if rows is None or rows.shape[0] < need:
                size = max(need, 64 if rows is None else 2 * rows.shape[0])
                new_rows = np.zeros((size, self.n_sigma))
                new_have = np.zeros(size, dtype=bool)
                if rows is not None:
                    new_rows[: rows.shape[0]] = rows
                    new_have[: have.size] = have
                rows, have = new_rows, new_have
                self._rows[n], self._have[n] = rows, have
            missing = np.unique(sums[~have[sums]])
            for start in range(0, missing.size, 16):
                chunk = missing[start : start + 16]
                ll = chunk[:, None] * self.log_rates[None, :] - n * self.rate_grid.points[None, :]
                rows[chunk] = logsumexp(self.log_cond[None, :, :] + ll[:, None, :], axis=2)
                have[chunk] = True
            return rows[sums]


def group_log_marginal(counts: Sequence[int], sigma: float, model: HierModel) -> float:
    """log of the integral over b of P(b | sigma) * prod_i Poisson(x_i | b).

    The integral runs over the model's rate grid; an empty group has
    marginal 1 and returns 0.
    """
    counts = np.asarray(list(counts), dtype=np.int64)
    if counts.size == 0:
        return 0.0
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    log_cond = model.log_cond_at(sigma)
    b = model.rate_grid.points
    ll = counts.sum() * model.log_rates - counts.size * b - gammaln(counts + 1.0).sum()
    terms = log_cond + ll
    if not np.any(np.isfinite(terms)):
        raise FloatingPointError("all quadrature terms are -inf")
    return float(logsumexp(terms))


def log_likelihood_sigma(grouped_counts: Sequence[Sequence[int]], sigma: float, model: HierModel) -> float:
    """Sum of per-hyperplane marginals; empty groups contribute 0."""
    return float(sum(group_log_marginal(c, sigma, model) for c in grouped_counts if len(c)))


@dataclass(frozen=True)
class PriorDraw:
    sigma: float
    rates: np.ndarray = field(repr=False)
    counts: dict = field(repr=False)
    sigma_index: int = -1
    rate_indices: np.ndarray = field(default=None, repr=False)


def _draw_indices(log_mass: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draws; ``log_mass`` rows are distributions, ``u`` uniforms."""
    cdf = np.cumsum(np.exp(log_mass), axis=-1)
    cdf[..., -1] = np.inf
    return (cdf < u[..., None]).sum(axis=-1)


def draw_prior_predictive(model: HierModel, n_hyperplanes: int, hyperplane_of: np.ndarray, n_draws: int, rng):
    """Vectorized prior-predictive draws on the grid model.

    Returns sigma indices ``(n_draws,)``, rate indices ``(n_draws, n_hyperplanes)``
    and counts ``(n_draws, n_scenarios)`` clamped to ``count_cap``.
    """
    j = _draw_indices(model.log_prior_sigma[None, :], rng.random(n_draws))
    r = _draw_indices(model.log_cond[j][:, None, :], rng.random((n_draws, n_hyperplanes)))
    rates = model.rate_grid.points[r]
    counts = rng.poisson(rates[:, hyperplane_of])
    np.minimum(counts, model.count_cap, out=counts)
    return j, r, counts


def prior_predictive_sample(model: HierModel, space: ScenarioSpace, rng: np.random.Generator) -> PriorDraw:
    """One draw of (sigma, rate per hyperplane, count per scenario).

    Draws come from the grid-discretized model. Counts above ``count_cap``
    are clamped to it.
    """
    levels = space.schema.hyperplane_levels
    hp = np.asarray(space.hyperplane_indices(), dtype=np.int64)
    j, r, counts = draw_prior_predictive(model, len(levels), hp, 1, rng)
    return PriorDraw(
        sigma=float(model.sigma_grid.points[j[0]]),
        rates=model.rate_grid.points[r[0]],
        counts={sid: int(c) for sid, c in zip(space.ids, counts[0])},
        sigma_index=int(j[0]),
        rate_indices=r[0],
    )


def load_model(path=None) -> HierModel:
    """Build a model from a JSON config file, or the defaults when ``path`` is None."""
    if path is None:
        return HierModel.from_config({})
    config = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(config, dict):
        raise ValueError(f"{path}: model config must be a JSON object")
    return HierModel.from_config(config)
