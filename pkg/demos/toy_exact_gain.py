"""
Exact information gain on a tiny model
======================================

Two sigma values, two towns with two scenarios each and counts capped at
5. That is small enough to enumerate every outcome, so the Monte-Carlo
estimator can be held against the exact value.
"""
import itertools

import numpy as np

from plane_sample import (
    FeatureSchema,
    Grid,
    HierModel,
    Scenario,
    ScenarioSpace,
    exact_information_gain,
    information_gain,
    prior_entropy,
)

model = HierModel(
    hyperprior_scale=5.0,
    sigma_grid=Grid(np.array([0.5, 2.0]), np.ones(2)),
    rate_grid=Grid.log_spaced(0.1, 5.0, 8),
    count_cap=5,
)
schema = FeatureSchema((("town", ("A", "B")), ("route", ("1", "2"))), "town")
space = ScenarioSpace(schema, tuple(Scenario(2 * t + r, (t, r)) for t in range(2) for r in range(2)))

print(f"prior entropy of sigma: {prior_entropy(model):.4f} nats")

# gain of every subset, exactly
for k in range(1, 5):
    for ids in itertools.combinations(space.ids, k):
        print(f"  {ids}: {exact_information_gain(list(ids), space, model):.4f}")

# a second scenario from the other town is worth more than one from the same town
same = exact_information_gain([0, 1], space, model)
other = exact_information_gain([0, 2], space, model)
print(f"same town {same:.4f} vs other town {other:.4f}")

# the estimator with its 90% interval
rng = np.random.default_rng(0)
est = information_gain([0, 2], space, model, rng=rng, abs_error=0.02)
print(f"MC estimate {est.mean:.4f} +/- {est.ci_halfwidth:.4f} from {est.n_samples} samples")
