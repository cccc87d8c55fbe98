import math
import random

import numpy as np
import pytest

from binprice import (
    CoverageError,
    DiscreteDistribution,
    LaminarInstance,
    ProductionInstance,
    build_lp_optimal,
    check_negative_cylinder,
    evaluate_exact,
    extract_pricing,
    production_to_laminar,
    prophet_value,
    search_dependency_counterexample,
    simulate,
    solve_full_dp,
    solve_optimal,
    solve_subproblem_dp,
)
from binprice.harness import prophet_samples, report_to_csv
from binprice.model import TypeSubproblem
from binprice.rounding import PricingPolicy

from conftest import oracle_chain_joint, random_production

U02 = DiscreteDistribution.uniform([0, 2])
U01 = DiscreteDistribution.uniform([0, 1])


def accept_all_policy(inst):
    rules = {}
    from binprice.model import BinSubproblem, reachable_profile
    dyn = BinSubproblem(inst, 0)
    levels, _ = reachable_profile(dyn)
    for lvl, t in enumerate(dyn.elements):
        for s in levels[lvl]:
            rules[(t, s)] = (-math.inf, 1.0)
    return PricingPolicy("root", rules)


def test_simulate_deterministic_instance_accept_all():
    inst = LaminarInstance.build(
        (DiscreteDistribution.point(2), DiscreteDistribution.point(3)),
        {"cap": 2, "children": [{"element": 0}, {"element": 1}]})
    rep = simulate(accept_all_policy(inst), inst, 50, seed=4)
    assert rep.mean == 5.0 and rep.stderr == 0.0
    assert rep.total_violations == 0
    assert rep.acceptance_frequency == (1.0, 1.0)


def test_simulate_all_infinite_policy():
    inst = LaminarInstance.build(
        (U02,), {"cap": 1, "children": [{"element": 0}]})
    pol = PricingPolicy("root", {(0, (1,)): (math.inf, 0.0)})
    rep = simulate(pol, inst, 100, seed=0)
    assert rep.mean == 0.0
    assert rep.ignored_fraction == 0.0  # never counter-blocked, just priced out


def test_simulate_matches_exact_value_within_ci():
    inst = LaminarInstance.build(
        (U02, DiscreteDistribution.point(1)),
        {"cap": 1, "children": [{"element": 0}, {"element": 1}]})
    built = build_lp_optimal(inst)
    sol = solve_optimal(built.model)
    pol = extract_pricing(sol, built, "root")
    rep = simulate(pol, inst, 200_000, seed=13)
    assert abs(rep.mean - 1.5) <= 3.5 * rep.stderr
    assert rep.total_violations == 0


def test_simulate_is_deterministic_across_threads_and_chunks():
    rng = random.Random(3)
    p = random_production(rng, n_max=5)
    built = build_lp_optimal(production_to_laminar(p))
    sol = solve_optimal(built.model)
    pol = extract_pricing(sol, built, "root")
    a = simulate(pol, p, 9000, seed=42, threads=1)
    b = simulate(pol, p, 9000, seed=42, threads=4)
    assert a.to_json_dict() == b.to_json_dict()
    assert report_to_csv(a.to_csv_rows()) == report_to_csv(b.to_csv_rows())


def test_simulate_uncovered_state_is_a_hard_fault():
    inst = LaminarInstance.build(
        (U02, U02), {"cap": 2, "children": [{"element": 0}, {"element": 1}]})
    pol = PricingPolicy("root", {(0, (2,)): (-1.0, 1.0)})  # nothing for t=1
    with pytest.raises(CoverageError):
        simulate(pol, inst, 10, seed=1)


def test_evaluate_exact_matches_dp_value(corpus):
    for entry in corpus[:25]:
        tbl, pol = solve_full_dp(entry.laminar)
        welfare, _ = evaluate_exact(pol, entry.laminar)
        assert abs(welfare - tbl.optimal) <= 1e-9, entry.name


def test_evaluate_exact_all_infinite():
    inst = LaminarInstance.build(
        (U02,), {"cap": 1, "children": [{"element": 0}]})
    pol = PricingPolicy("root", {(0, (1,)): (math.inf, 0.0)})
    welfare, trace = evaluate_exact(pol, inst)
    assert welfare == 0.0
    assert trace[(1, (1,))] == 1.0  # mass never leaves the initial state


def test_prophet_hand_examples():
    inst = LaminarInstance.build(
        tuple(DiscreteDistribution.point(v) for v in (5, 3, 2)),
        {"cap": 2, "children": [{"element": i} for i in range(3)]})
    assert prophet_value(inst, 10, seed=0) == 8.0
    inst2 = LaminarInstance.build(
        tuple(DiscreteDistribution.point(v) for v in (5, 4, 3)),
        {"cap": 2, "children": [
            {"cap": 1, "children": [{"element": 0}, {"element": 1}]},
            {"element": 2}]})
    assert prophet_value(inst2, 10, seed=0) == 8.0  # 5 + 3, 4 blocked


def test_prophet_gap_instance():
    p = ProductionInstance(
        dists=(DiscreteDistribution.point(1),
               DiscreteDistribution.of([(0.0, 0.5), (2.0, 0.5)])),
        types=(0, 1), days=(0, 0), production=((1,), (1,)), shipping=1)
    lam = production_to_laminar(p)
    samples = prophet_samples(lam, 100_000, seed=7)
    stderr = samples.std(ddof=1) / math.sqrt(samples.size)
    assert abs(samples.mean() - 1.5) <= 3.5 * stderr
    tbl, _ = solve_full_dp(lam)
    assert abs(tbl.optimal - 1.0) <= 1e-9  # ratio 1.5 at desk scale


def test_cylinder_mutual_exclusion_chain():
    p = ProductionInstance(dists=(U02, U02), types=(0, 0), days=(0, 0),
                           production=((1,),), shipping=1)
    ok, subset, gap = check_negative_cylinder(p, 0, 0.0)
    assert ok and gap <= 1e-12


def test_cylinder_equality_under_independence():
    # ample capacity and shift below every value: everyone always accepted
    p = ProductionInstance(dists=(U02, U02, U02), types=(0, 0, 0),
                           days=(0, 0, 0), production=((3,),), shipping=3)
    ok, subset, gap = check_negative_cylinder(p, 0, -10.0)
    assert ok
    assert abs(gap) <= 1e-12  # equality for all subsets


def test_cylinder_moments_agree_with_path_enumeration_oracle():
    # the checker's subset moments are exact: cross-check every one of them
    # against a literal walk over all value paths
    rng = random.Random(101)
    for _ in range(25):
        p = random_production(rng, n_max=5, m_max=1, days_max=2)
        for shift in (-1.0, 0.0, 0.7):
            tbl = solve_subproblem_dp(p, 0, shift)
            dyn = TypeSubproblem(p, 0)
            taus = []
            for i, t in enumerate(dyn.elements):
                level = {}
                for (lvl, s) in tbl.entries:
                    if lvl == i and dyn.can_pick(s, t):
                        tau = (tbl.entries[(i + 1, s)]
                               - tbl.entries[(i + 1, (s[0] + 1,))])
                        level[s[0]] = tau + shift
                taus.append(level)
            joint = oracle_chain_joint(p, 0, taus)
            l = len(dyn.elements)
            for mask in range(2 ** l):
                want = sum(pr for m, pr in joint.items()
                           if (m & mask) == mask)
                got = _moment(p, 0, shift, mask)
                assert abs(want - got) <= 1e-10


def test_cylinder_violation_regression():
    # Minimal chain where the optimal policy's acceptance indicators are
    # positively correlated: the last buyer is served only in histories where
    # the always-accepting buyer before him was served too, so conditioning
    # on that acceptance raises his odds.  No value ever ties a threshold.
    # The checker must flag it, in agreement with brute force.
    p = ProductionInstance(
        dists=(DiscreteDistribution.uniform([0.5, 10]),
               DiscreteDistribution.uniform([0.5, 10]),
               DiscreteDistribution.point(2),
               DiscreteDistribution.point(1)),
        types=(0,) * 4, days=(0,) * 4, production=((2,),), shipping=4)
    ok, subset, gap = check_negative_cylinder(p, 0, 0.0)
    assert not ok
    assert subset == (2, 3)
    # E[X2 X3] = Pr[no early sale] = 1/4; E[X2] E[X3] = 3/4 * 1/4
    assert abs(gap - (0.25 - 0.75 * 0.25)) <= 1e-12


def _moment(p, type_index, shift, mask):
    """Pr[every masked buyer accepted] by a direct forward pass."""
    tbl = solve_subproblem_dp(p, type_index, shift)
    dyn = TypeSubproblem(p, type_index)
    elems = dyn.elements
    cur = {0: 1.0}
    for i, t in enumerate(elems):
        nxt = {}
        for s, mass in cur.items():
            can = dyn.can_pick((s,), t)
            if can:
                tau = (tbl.entries[(i + 1, (s,))]
                       - tbl.entries[(i + 1, (s + 1,))])
                acc = sum(pa for v, pa in p.dists[t].atoms if v - shift >= tau)
            else:
                acc = 0.0
            if (mask >> i) & 1:
                if acc > 0:
                    nxt[s + 1] = nxt.get(s + 1, 0.0) + mass * acc
            else:
                if acc > 0:
                    nxt[s + 1] = nxt.get(s + 1, 0.0) + mass * acc
                if acc < 1:
                    nxt[s] = nxt.get(s, 0.0) + mass * (1 - acc)
        cur = nxt
    return sum(cur.values())


def test_search_finds_canonical_structure_and_controls():
    dists = [U02, U02, U01, U02, U02]
    hits = search_dependency_counterexample(dists)
    assert hits
    canonical = [h for h in hits
                 if abs(h.price_after_pick - 1.0) <= 1e-9
                 and abs(h.price_after_skip - 1.25) <= 1e-9]
    assert canonical
    assert search_dependency_counterexample(dists, chains_only=True) == []
    assert search_dependency_counterexample([U02, U02]) == []


def test_trial_substreams_are_stable():
    from binprice.harness import trial_generator
    a = trial_generator(7, 3).random(4)
    b = trial_generator(7, 3).random(4)
    c = trial_generator(7, 4).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
