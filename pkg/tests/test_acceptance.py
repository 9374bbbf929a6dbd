"""Acceptance criteria, one test each, every one printing a PASS/FAIL line.

The lines are also collected into the terminal summary (see conftest).
"""
import itertools
import math
import time

import numpy as np
import pytest

from conftest import make_toy_model, make_toy_space
from oracles import brute_gain
from plane_sample import (
    HierModel,
    Observation,
    SyntheticConfig,
    brute_force_optimal,
    entropy,
    exact_information_gain,
    expected_conditional_entropy,
    greedy_select,
    group_log_marginal,
    posterior_predictive_check,
    posterior_sigma,
    prior_predictive_sample,
    run_comparison,
)
from plane_sample.cli import main as cli_main
from plane_sample.experiment import synthetic_space
from plane_sample.hier_model import Grid
from plane_sample.inference import exact_conditional_entropy

RESULTS: list[str] = []


def report(name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS.append(line)
    print(line)


# -- 1. exact-model correctness -------------------------------------------------


def test_c1_mc_estimate_covers_exact_value():
    model, space = make_toy_model(), make_toy_space()
    ids = [0, 1, 2, 3]
    exact = exact_conditional_entropy(ids, space, model)
    start = time.perf_counter()
    hits = 0
    for seed in range(100):
        est = expected_conditional_entropy(ids, space, model, 0.9, 0.1, np.random.default_rng(seed), 2000)
        hits += abs(est.mean - exact) <= est.ci_halfwidth
    elapsed = time.perf_counter() - start
    ok = hits >= 85 and elapsed < 60
    report("1 exact-model correctness", ok, f"{hits}/100 inside the 90% CI of exact {exact:.6f} (need >= 85), {elapsed:.1f}s")
    assert ok


# -- 2. submodularity and monotonicity -----------------------------------------


def test_c2_exact_submodular_and_monotone():
    model, space = make_toy_model(), make_toy_space()
    start = time.perf_counter()
    ground = tuple(space.ids)
    subsets = [frozenset(c) for r in range(len(ground) + 1) for c in itertools.combinations(ground, r)]
    g = {s: exact_information_gain(sorted(s), space, model) for s in subsets}
    worst_sub, worst_mono, worst_proper, n_triples = math.inf, math.inf, math.inf, 0
    for a in subsets:
        for b in subsets:
            if not a <= b:
                continue
            worst_mono = min(worst_mono, g[b] - g[a])
            for e in ground:
                if e in b:
                    continue
                n_triples += 1
                margin = (g[a | {e}] - g[a]) - (g[b | {e}] - g[b])
                worst_sub = min(worst_sub, margin)
                if a < b:
                    worst_proper = min(worst_proper, margin)
    elapsed = time.perf_counter() - start
    ok = worst_sub >= -1e-9 and worst_mono >= -1e-9 and elapsed < 10
    report(
        "2 submodularity & monotonicity",
        ok,
        f"{n_triples} triples, min dominance margin {worst_sub:.3e} ({worst_proper:.4f} for A strictly inside B), "
        f"min g(B)-g(A) {worst_mono:.3e}, {elapsed:.2f}s",
    )
    assert ok


# -- 3. greedy guarantee ---------------------------------------------------------

TOYS = [
    dict(per_group=(2, 2), budget=2, model={}),
    dict(per_group=(4, 4), budget=3, model=dict(count_cap=4)),
    dict(per_group=(3, 3, 2), budget=3, model=dict(count_cap=4)),
    dict(per_group=(5, 3), budget=4, model=dict(count_cap=3, sigmas=(0.3, 1.0, 3.0))),
    dict(per_group=(2, 2, 2, 2), budget=4, model=dict(count_cap=3, rate=(0.1, 5.0, 6))),
    dict(per_group=(6, 4), budget=3, model=dict(count_cap=4, scale=1.0)),
    dict(per_group=(10,), budget=3, model=dict(count_cap=4, sigmas=(0.5, 1.5, 4.0))),
]


def test_c3_greedy_within_one_minus_inv_e():
    start = time.perf_counter()
    ratios = []
    for toy in TOYS:
        model = make_toy_model(**toy["model"])
        space = make_toy_space(toy["per_group"])
        _, opt = brute_force_optimal(space, model, toy["budget"])
        trace = greedy_select(space, model, exact=True, budget=toy["budget"])
        ratios.append(trace.steps[-1].gain.mean / opt)
    elapsed = time.perf_counter() - start
    ok = len(ratios) >= 5 and min(ratios) >= 0.632 and elapsed < 120
    report(
        "3 greedy guarantee",
        ok,
        f"{len(ratios)} instances, min greedy/optimal {min(ratios):.4f} (need >= 0.632), {elapsed:.1f}s",
    )
    assert ok


def test_c3_oracle_cross_check():
    # brute_force_optimal rests on exact_information_gain; tie it to the independent oracle
    model, space = make_toy_model(count_cap=4), make_toy_space((4, 4))
    ids, g = brute_force_optimal(space, model, 3)
    assert g == pytest.approx(brute_gain(list(ids), space, model), abs=1e-10)


# -- 4. full-scale experiment -------------------------------------------------------


@pytest.fixture(scope="module")
def comparison():
    start = time.perf_counter()
    rep = run_comparison(SyntheticConfig(seed=0), HierModel(), 5, np.random.default_rng(0))
    return rep, time.perf_counter() - start


def test_c4a_greedy_stops_early(comparison):
    rep, elapsed = comparison
    idx = rep.methods["greedy"].stopping_indices
    ok = np.mean(idx) <= 12
    report("4a greedy stopping index", ok, f"mean {np.mean(idx):.1f} over runs {idx} (need <= 12), {elapsed:.0f}s")
    assert ok


def test_c4b_greedy_before_lhs(comparison):
    rep, _ = comparison
    g, lhs = rep.methods["greedy"], rep.methods["lhs"]
    ok = g.mean_stopping_index < lhs.mean_stopping_index
    report(
        "4b greedy stops before LHS",
        ok,
        f"greedy mean {g.mean_stopping_index:.1f} {g.stopping_indices} vs LHS mean "
        f"{lhs.mean_stopping_index:.1f} {lhs.stopping_indices} (need strictly less)",
    )
    assert ok


def test_c4c_common_plateau(comparison):
    rep, _ = comparison
    finals = {k: round(v.final_gain, 4) for k, v in rep.methods.items()}
    ok = rep.plateau_spread() < 0.2
    report("4c common plateau", ok, f"final gains {finals}, spread {rep.plateau_spread():.4f} nats (need < 0.2)")
    assert ok


# -- 5. estimator precision ---------------------------------------------------------


def test_c5_precision_contract(comparison):
    rep, _ = comparison
    estimates = [g for m in rep.methods.values() for curve in m.curves for g in curve]
    trace = greedy_select(synthetic_space(SyntheticConfig()), HierModel(), rng=np.random.default_rng(1))
    estimates += trace.gains
    bad = [g for g in estimates if g.ci_halfwidth > 0.1 and not g.capped]
    capped = sum(g.capped for g in estimates)
    worst = max(g.ci_halfwidth for g in estimates if not g.capped)
    ok = not bad and all(g.confidence == 0.9 for g in estimates)
    report(
        "5 precision contract",
        ok,
        f"{len(estimates)} estimates, max unflagged half-width {worst:.4f}, {capped} capped, {len(bad)} violations",
    )
    assert ok


# -- 6. numerical hygiene -------------------------------------------------------------


def test_c6_numerical_hygiene():
    model = HierModel()
    space = synthetic_space(SyntheticConfig())
    rng = np.random.default_rng(6)
    worst_norm, ent_ok = 0.0, True
    log_j = math.log(model.n_sigma)
    for _ in range(1000):
        n = int(rng.integers(0, 60))
        ids = rng.choice(space.ids, n, replace=False)
        scale = rng.choice([0.5, 2.0, 8.0, 30.0])
        counts = np.minimum(rng.poisson(scale, n), 200)
        post = posterior_sigma([Observation(int(i), int(c)) for i, c in zip(ids, counts)], space, model)
        worst_norm = max(worst_norm, abs(post.mass.sum() - 1.0))
        h = entropy(post)
        ent_ok &= 0.0 <= h <= log_j + 1e-12
    fine = HierModel(rate_grid=Grid.log_spaced(0.01, 40.0, 800))
    worst_ref = 0.0
    for counts in ([0], [1], [3, 3], [7], [20], [0, 5, 11], [20, 20]):
        for s in model.sigma_grid.points[model.sigma_grid.points <= 15.0][::5]:
            worst_ref = max(worst_ref, abs(group_log_marginal(counts, s, fine) - group_log_marginal(counts, s, model)))
    ok = worst_norm < 1e-10 and ent_ok and worst_ref < 1e-6
    report(
        "6 numerical hygiene",
        ok,
        f"max |sum-1| {worst_norm:.1e}, entropy bounds {'held' if ent_ok else 'violated'}, "
        f"max refinement change {worst_ref:.1e}",
    )
    assert ok


# -- 7. determinism ---------------------------------------------------------------------


def test_c7_byte_identical_outputs(tmp_path):
    data = tmp_path / "data"
    assert cli_main(["generate", "--out-dir", str(data), "--seed", "11"]) == 0
    scen = str(data / "scenarios.csv")
    runs = {}
    for w in (1, 2, 4):
        out = tmp_path / f"w{w}"
        assert cli_main(["select", "--scenarios", scen, "--seed", "5", "--workers", str(w), "--out", str(out / "s")]) == 0
        assert cli_main(["compare", "--scenarios", scen, "--seed", "5", "--runs", "2", "--max-size", "6",
                         "--workers", str(w), "--out", str(out / "c")]) == 0
        runs[w] = out
    names = ["s/trace.json", "s/gain_curve.svg", "s/gain_curve.csv", "c/comparison.json", "c/comparison.svg",
             "c/greedy.csv", "c/lhs.csv", "c/random.csv"]
    same = all((runs[1] / n).read_bytes() == (runs[w] / n).read_bytes() for w in (2, 4) for n in names)
    # and a fresh re-run with the same worker count
    again = tmp_path / "again"
    assert cli_main(["select", "--scenarios", scen, "--seed", "5", "--out", str(again)]) == 0
    same &= (again / "trace.json").read_bytes() == (runs[1] / "s/trace.json").read_bytes()
    report("7 determinism", same, f"{len(names)} files byte-identical across workers 1/2/4 and a re-run")
    assert same


# -- 8. PPC calibration -----------------------------------------------------------------


def test_c8_ppc_calibration():
    model = HierModel()
    space = synthetic_space(SyntheticConfig())
    fractions = []
    for seed in range(10):
        draw = prior_predictive_sample(model, space, np.random.default_rng(seed))
        obs = [Observation(i, c) for i, c in draw.counts.items()]
        rep = posterior_predictive_check(obs, space, model, 500, np.random.default_rng(500 + seed))
        fractions.append(rep.agreement_fraction)
    good = sum(f >= 0.8 for f in fractions)
    misfit = posterior_predictive_check(
        [Observation(i, 40) for i in space.ids], space, model, 500, np.random.default_rng(0)
    )
    flagged = int((~misfit.agree).sum())
    ok = good >= 8 and flagged > 0 and misfit.agreement_fraction < 0.8
    report(
        "8 PPC calibration",
        ok,
        f"{good}/10 seeds with >= 80% bins agreeing (min {min(fractions):.2f}); "
        f"misfit data flags {flagged} bins, agreement {misfit.agreement_fraction:.2f}",
    )
    assert ok
