"""
Posterior predictive check
==========================

Fit the grid posterior to observed counts, replicate the dataset many
times and see whether the observed count histogram sits inside the
replicated 90% bands. Data from the model should pass; a dataset where
every scenario had 40 events should not.
"""
import numpy as np

from plane_sample import HierModel, Observation, SyntheticConfig, generate_synthetic, posterior_predictive_check
from plane_sample.svg import ppc_svg

model = HierModel()
space, observations = generate_synthetic(SyntheticConfig(seed=3))

report = posterior_predictive_check(observations, space, model, 500, np.random.default_rng(0))
for b, o, lo, hi, ok in zip(report.bins, report.observed, report.replicated_lo, report.replicated_hi, report.agree):
    print(f"{b:>4s}: observed {o:.3f}  band [{lo:.3f}, {hi:.3f}]  {'ok' if ok else 'MISFIT'}")
print(f"agreement {report.agreement_fraction:.0%}")

bad = [Observation(i, 40) for i in space.ids]
misfit = posterior_predictive_check(bad, space, model, 500, np.random.default_rng(0))
print(f"all-40 data: agreement {misfit.agreement_fraction:.0%}")

with open("ppc.svg", "w") as fh:
    fh.write(ppc_svg(report))
