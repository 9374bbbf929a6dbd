"""Information-driven scenario selection on a Poisson hierarchical model.

Scenarios are grouped into hyperplanes (e.g. by town); per-scenario event
counts follow ``Poisson(b_p)`` with ``b_p ~ HalfNormal(sigma)`` and
``sigma ~ HalfNormal(5)``. A scenario set is scored by the expected
information it reveals about ``sigma`` (or one ``b_p``) and chosen greedily
until the gain stops increasing significantly.
"""
__version__ = "0.1.0"

from .scenario_space import (
    FeatureSchema,
    Observation,
    Scenario,
    ScenarioFormatError,
    ScenarioSpace,
    load_observations,
    load_space,
    partition_by_hyperplane,
    write_observations,
    write_space,
)
from .hier_model import (
    Grid,
    HierModel,
    group_log_marginal,
    halfnormal_logpdf,
    load_model,
    log_likelihood_sigma,
    poisson_logpmf,
    prior_predictive_sample,
)
from .inference import (
    GainEstimate,
    PosteriorGrid,
    PredictiveBank,
    SamplingCapReached,
    entropy,
    exact_conditional_entropy,
    exact_information_gain,
    expected_conditional_entropy,
    information_gain,
    information_gain_hyperplane,
    posterior_sigma,
    prior_entropy,
)
from .selection import (
    SelectionTrace,
    brute_force_optimal,
    greedy_select,
    lhs_select,
    random_select,
    stopping_test,
)
from .experiment import (
    ComparisonReport,
    PPCReport,
    SyntheticConfig,
    generate_synthetic,
    posterior_predictive_check,
    run_comparison,
)
