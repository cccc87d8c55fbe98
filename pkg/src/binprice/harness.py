"""Verification harness: simulation, exact evaluation, benchmarks, checks.

Randomness contract (reproducible across thread counts): all Monte Carlo
draws come from numpy's Philox counter-based generator, one substream per
trial keyed by ``seed * 2^64 + trial``.  Within a trial the draw layout is
fixed: ``simulate`` consumes ``2n`` uniforms (value draw then tie coin per
arrival, whether or not a tie occurs); ``prophet_value`` consumes ``n``
(one value draw per element).  Trials are processed in fixed-size chunks,
threads only distribute chunks, and every reduction is either exact integer
arithmetic or a single fixed-order pass over a preallocated per-trial
array, so reports are byte-identical for any ``--threads``.

``evaluate_exact`` forward-propagates the exact state distribution of a
policy block; on a composed policy it evaluates each block with the hard
counters off, which is the quantity the LP accounts for.

``check_negative_cylinder`` computes, exactly, every joint acceptance
moment ``E[prod_{t in S} X_t]`` of the optimal shifted chain policy with a
forward pass over (subset, sold count) and compares it against the product
of marginals.  ``search_dependency_counterexample`` sweeps small laminar
structures for a later element whose optimal price drops after an earlier
acceptance.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import (
    DEFAULT_STATE_CAP,
    InstanceError,
    LaminarInstance,
    ProductionInstance,
    BinSubproblem,
    SizingError,
    TypeSubproblem,
    as_laminar,
    bind_dynamics,
    reachable_profile,
)
from .dp import solve_full_dp, solve_subproblem_dp
from .rounding import ComposedPolicy, PricingPolicy

CHUNK = 4096
_MASK64 = (1 << 64) - 1


class CoverageError(RuntimeError):
    """A simulated or evaluated run reached a state the policy does not cover."""


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """Philox substream for one trial; key = seed * 2^64 + trial."""
    key = ((seed & _MASK64) << 64) | (trial & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class SimulationReport:
    trials: int
    seed: int
    mean: float
    stderr: float
    violations: dict
    ignored_fraction: float
    ignored_stderr: float
    acceptance_frequency: tuple

    @property
    def total_violations(self) -> int:
        return sum(self.violations.values())

    def to_json_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "welfare_mean": self.mean,
            "welfare_stderr": self.stderr,
            "violations": dict(sorted(self.violations.items())),
            "violations_total": self.total_violations,
            "ignored_fraction": self.ignored_fraction,
            "ignored_stderr": self.ignored_stderr,
            "acceptance_frequency": list(self.acceptance_frequency),
        }

    def to_csv_rows(self) -> list[tuple]:
        rows = [("welfare_mean", self.mean, self.stderr, self.trials, self.seed),
                ("ignored_fraction", self.ignored_fraction, self.ignored_stderr,
                 self.trials, self.seed),
                ("violations_total", self.total_violations, "", self.trials,
                 self.seed)]
        for key in sorted(self.violations):
            rows.append((f"violations[{key}]", self.violations[key], "",
                         self.trials, self.seed))
        for t, f in enumerate(self.acceptance_frequency):
            rows.append((f"accept_freq[{t}]", f, "", self.trials, self.seed))
        return rows


def _csv_cell(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def report_to_csv(rows) -> str:
    out = ["metric,value,stderr,trials,seed"]
    for metric, value, stderr, trials, seed in rows:
        out.append(",".join([metric, _csv_cell(value), _csv_cell(stderr),
                             _csv_cell(trials), _csv_cell(seed)]))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Compiled execution plan
# ---------------------------------------------------------------------------


class _Plan:
    """Arrays for vectorized execution of a policy on an instance."""

    def __init__(self, policy, inst, state_cap):
        if isinstance(policy, ComposedPolicy):
            blocks = dict(policy.blocks)
            element_block = dict(policy.element_block)
            counter_caps = dict(policy.counter_caps)
            counter_keys = dict(policy.counter_keys)
        else:
            blocks = {policy.scope: policy}
            element_block = None
            counter_caps = {}
            counter_keys = {}
        needs_laminar = any(k == "root" or k.startswith(("bin:", "elem:"))
                            for k in blocks)
        if needs_laminar:
            work = as_laminar(inst)
        else:
            if not isinstance(inst, ProductionInstance):
                raise InstanceError("policy scopes require a production instance")
            work = inst
        self.inst = work
        if isinstance(work, ProductionInstance):
            self.n = work.num_buyers
        else:
            self.n = work.num_elements

        self.block_keys = sorted(blocks)
        self.block_of = {}
        self.state_index = {}
        self.initial_idx = np.zeros(len(self.block_keys), dtype=np.int64)
        dyn_of = {}
        levels_of = {}
        for bi, key in enumerate(self.block_keys):
            dyn = bind_dynamics(key, work)
            dyn_of[key] = dyn
            levels, _ = reachable_profile(dyn, state_cap)
            levels_of[key] = levels
            states = sorted(set().union(*map(set, levels)))
            index = {s: i for i, s in enumerate(states)}
            self.state_index[key] = index
            self.initial_idx[bi] = index[dyn.initial]
            for e in dyn.elements:
                if e in self.block_of:
                    raise InstanceError(f"policy: element {e} covered twice")
                self.block_of[e] = (bi, key)
        missing = [e for e in range(self.n) if e not in self.block_of]
        if missing:
            raise InstanceError([f"policy: element {e} not covered"
                                 for e in missing])
        if element_block is not None:
            for e, key in element_block.items():
                if self.block_of.get(e, (None, None))[1] != key:
                    raise InstanceError(f"policy: dispatch mismatch at element {e}")

        # constraint meters: every real capacity, checked on accept
        self.meter_names = []
        if isinstance(work, ProductionInstance):
            self.meter_names = [f"type:{j}" for j in range(work.num_types)]
            self.meter_names.append("shipping")
        else:
            self.meter_names = [("root" if b == 0 else f"bin:{b}")
                                for b in range(work.num_bins)]
        meter_idx = {name: i for i, name in enumerate(self.meter_names)}
        self.num_meters = len(self.meter_names)

        counter_name = {"shipping": "shipping"}
        if isinstance(work, LaminarInstance):
            counter_name = {f"bin:{b}": ("root" if b == 0 else f"bin:{b}")
                            for b in range(work.num_bins)}

        self.values = []
        self.cumprobs = []
        self.tau = []
        self.p = []
        self.next_idx = []
        self.covered = []
        self.meters_of = []
        self.meter_caps_of = []
        self.counters_of = []
        self.counter_caps_of = []
        for e in range(self.n):
            d = work.dists[e]
            self.values.append(np.array(d.values))
            self.cumprobs.append(np.cumsum(np.array(d.probs)))
            bi, key = self.block_of[e]
            dyn = dyn_of[key]
            pol = blocks[key]
            index = self.state_index[key]
            ns = len(index)
            tau = np.full(ns, np.nan)
            pp = np.zeros(ns)
            nxt = np.arange(ns, dtype=np.int64)
            cov = np.zeros(ns, dtype=bool)
            for s, si in index.items():
                rule = pol.rule(e, s)
                if rule is not None:
                    cov[si] = True
                if not dyn.can_pick(s, e):
                    tau[si] = np.inf  # hard guard over whatever the rule says
                    pp[si] = 0.0
                    continue
                if rule is not None:
                    tau[si], pp[si] = rule
                    nxt[si] = index[dyn.pick(s, e)]
            self.tau.append(tau)
            self.p.append(pp)
            self.next_idx.append(nxt)
            self.covered.append(cov)
            if isinstance(work, ProductionInstance):
                j = work.types[e]
                names = [f"type:{j}", "shipping"]
                caps = [work.available(j, work.days[e]), work.shipping]
            else:
                names = [("root" if b == 0 else f"bin:{b}")
                         for b in work.elem_ancestors(e)]
                caps = [work.bin_caps[b] for b in work.elem_ancestors(e)]
            self.meters_of.append(np.array([meter_idx[nm] for nm in names],
                                           dtype=np.int64))
            self.meter_caps_of.append(np.array(caps, dtype=np.int64))
            ckeys = counter_keys.get(e, ())
            self.counters_of.append(np.array(
                [meter_idx[counter_name[k]] for k in ckeys], dtype=np.int64))
            self.counter_caps_of.append(np.array(
                [counter_caps[k] for k in ckeys], dtype=np.int64))


def _run_chunk(plan: _Plan, seed, lo, hi, welfare_out, ignored_out,
               accept_out, viol_out):
    m = hi - lo
    n = plan.n
    draws = np.empty((m, 2 * n))
    for r in range(m):
        draws[r] = trial_generator(seed, lo + r).random(2 * n)
    states = np.tile(plan.initial_idx, (m, 1))
    counts = np.zeros((m, plan.num_meters), dtype=np.int64)
    welfare = np.zeros(m)
    ignored = np.zeros(m, dtype=np.int64)
    for e in range(n):
        ai = np.searchsorted(plan.cumprobs[e], draws[:, 2 * e], side="right")
        ai = np.minimum(ai, len(plan.values[e]) - 1)
        v = plan.values[e][ai]
        bi, key = plan.block_of[e]
        si = states[:, bi]
        uncovered = ~plan.covered[e][si]
        if uncovered.any():
            bad = int(si[uncovered][0])
            state = {i: s for s, i in plan.state_index[key].items()}[bad]
            raise CoverageError(f"no rule for arrival {e} in state {state}")
        tau = plan.tau[e][si]
        pp = plan.p[e][si]
        if plan.counters_of[e].size:
            blocked = (counts[:, plan.counters_of[e]]
                       >= plan.counter_caps_of[e]).any(axis=1)
        else:
            blocked = np.zeros(m, dtype=bool)
        acc = (~blocked) & ((v > tau)
                            | ((v == tau) & (draws[:, 2 * e + 1] < pp)))
        ignored += blocked
        if acc.any():
            idx = np.nonzero(acc)[0]
            welfare[idx] += v[idx]
            states[idx, bi] = plan.next_idx[e][si[idx]]
            meters = plan.meters_of[e]
            counts[np.ix_(idx, meters)] += 1
            over = counts[np.ix_(idx, meters)] > plan.meter_caps_of[e]
            if over.any():
                viol_out += np.bincount(meters[np.nonzero(over)[1]],
                                        minlength=plan.num_meters)
            accept_out[e] += int(idx.size)
    welfare_out[lo:hi] = welfare
    ignored_out[lo:hi] = ignored


def simulate(policy, inst, trials: int, seed: int, *, threads: int = 1,
             state_cap=DEFAULT_STATE_CAP) -> SimulationReport:
    """Seeded Monte Carlo run of a policy; deterministic given the seed.

    A value is accepted iff it exceeds the quoted threshold, or equals it
    and an independent coin of the rule's bias lands heads.  Violation
    counts tally accepts that push any real capacity past its limit (always
    zero for well-formed policies); the ignored fraction counts arrivals
    quoted infinity by a hard counter.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    plan = _Plan(policy, inst, state_cap)
    welfare = np.zeros(trials)
    ignored = np.zeros(trials, dtype=np.int64)
    bounds = [(lo, min(lo + CHUNK, trials)) for lo in range(0, trials, CHUNK)]
    accepts = [np.zeros(plan.n, dtype=np.int64) for _ in bounds]
    viols = [np.zeros(plan.num_meters, dtype=np.int64) for _ in bounds]

    def work(ci):
        lo, hi = bounds[ci]
        _run_chunk(plan, seed, lo, hi, welfare, ignored, accepts[ci], viols[ci])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(len(bounds))))
    else:
        for ci in range(len(bounds)):
            work(ci)
    accept_total = np.sum(accepts, axis=0)
    viol_total = np.sum(viols, axis=0)
    mean = float(welfare.mean())
    stderr = (float(welfare.std(ddof=1) / math.sqrt(trials))
              if trials > 1 else 0.0)
    frac = ignored / plan.n
    ignored_mean = float(frac.mean())
    ignored_stderr = (float(frac.std(ddof=1) / math.sqrt(trials))
                      if trials > 1 else 0.0)
    return SimulationReport(
        trials=trials, seed=seed, mean=mean, stderr=stderr,
        violations={plan.meter_names[i]: int(viol_total[i])
                    for i in range(plan.num_meters)},
        ignored_fraction=ignored_mean, ignored_stderr=ignored_stderr,
        acceptance_frequency=tuple(float(c) / trials for c in accept_total),
    )


# ---------------------------------------------------------------------------
# Exact forward evaluation
# ---------------------------------------------------------------------------


def evaluate_exact(policy, inst, *, state_cap=DEFAULT_STATE_CAP):
    """Exact expected welfare and state-probability trace of a policy.

    Composed policies are evaluated block by block with the hard counters
    off; that is exactly the value the relaxation objective accounts for.
    Returns ``(welfare, trace)`` with ``trace[(t, state)]`` the probability
    of being in ``state`` when arrival ``t`` shows up (post-horizon states
    keyed by the instance size).
    """
    if isinstance(policy, ComposedPolicy):
        total = 0.0
        trace = {}
        for key in sorted(policy.blocks):
            w, tr = _evaluate_block(policy.blocks[key], inst, state_cap)
            total += w
            # arrival keys are unique across blocks; the post-horizon keys
            # of different blocks would collide, so they stay per-block
            trace.update({k: v for k, v in tr.items()
                          if k[0] in policy.element_block})
        return total, trace
    return _evaluate_block(policy, inst, state_cap)


def _evaluate_block(policy: PricingPolicy, inst, state_cap):
    dyn = bind_dynamics(policy.scope, inst)
    work = as_laminar(inst) if not policy.scope.startswith("type:") else inst
    n_total = (work.num_buyers if isinstance(work, ProductionInstance)
               else work.num_elements)
    cur = {dyn.initial: 1.0}
    welfare = 0.0
    trace = {}
    for e in dyn.elements:
        d = work.dists[e]
        nxt = {}
        for s, mass in cur.items():
            trace[(e, s)] = mass
            rule = policy.rule(e, s)
            if rule is None:
                raise CoverageError(f"no rule for arrival {e} in state {s}")
            tau, p = rule
            if not dyn.can_pick(s, e):
                nxt[s] = nxt.get(s, 0.0) + mass
                continue
            acc = d.tail_above(tau) + p * d.prob_at(tau)
            gain = sum(pa * v * (1.0 if v > tau else (p if v == tau else 0.0))
                       for v, pa in d.atoms)
            welfare += mass * gain
            if acc > 0.0:
                target = dyn.pick(s, e)
                nxt[target] = nxt.get(target, 0.0) + mass * acc
            if acc < 1.0:
                nxt[s] = nxt.get(s, 0.0) + mass * (1.0 - acc)
        cur = nxt
    for s, mass in cur.items():
        trace[(n_total, s)] = mass
    return welfare, trace


# ---------------------------------------------------------------------------
# Prophet (offline) benchmark
# ---------------------------------------------------------------------------


def prophet_samples(inst, trials: int, seed: int) -> np.ndarray:
    """Per-trial offline optimum via greedy in the laminar matroid."""
    lam = as_laminar(inst)
    n = lam.num_elements
    values = [np.array(d.values) for d in lam.dists]
    cums = [np.cumsum(np.array(d.probs)) for d in lam.dists]
    anc = [lam.elem_ancestors(e) for e in range(n)]
    caps0 = list(lam.bin_caps)
    out = np.empty(trials)
    for trial in range(trials):
        u = trial_generator(seed, trial).random(n)
        vals = [values[e][min(np.searchsorted(cums[e], u[e], side="right"),
                              len(values[e]) - 1)] for e in range(n)]
        order = sorted(range(n), key=lambda e: (-vals[e], e))
        rem = caps0.copy()
        total = 0.0
        for e in order:
            if vals[e] <= 0.0:
                break
            if all(rem[b] > 0 for b in anc[e]):
                for b in anc[e]:
                    rem[b] -= 1
                total += vals[e]
        out[trial] = total
    return out


def prophet_value(inst, trials: int, seed: int) -> float:
    """Monte Carlo estimate of the omniscient offline optimum."""
    return float(prophet_samples(inst, trials, seed).mean())


# ---------------------------------------------------------------------------
# Negative cylinder dependency
# ---------------------------------------------------------------------------


def check_negative_cylinder(p: ProductionInstance, type_index: int,
                            shift: float = 0.0, tol: float = 1e-9,
                            max_buyers: int = 20):
    """Exact all-subset check of E[prod X] <= prod E[X] for the optimal
    shifted chain policy.

    Acceptance indicators follow the subproblem table's thresholds with
    acceptance at equality.  Returns ``(ok, worst_subset, worst_gap)``;
    the gap is the largest ``E[prod] - prod E`` over all subsets.
    """
    table = solve_subproblem_dp(p, type_index, shift)
    dyn = TypeSubproblem(p, type_index)
    elems = dyn.elements
    l = len(elems)
    if l == 0:
        return True, (), 0.0
    if l > max_buyers:
        raise SizingError(dyn.key, 2 ** l, 2 ** max_buyers)
    smax = max(s[0] for (_, s) in table.entries)
    acc = np.zeros((l, smax + 1))
    for i, t in enumerate(elems):
        d = p.dists[t]
        for s in range(smax + 1):
            if table.value(i, (s,)) is None or not dyn.can_pick((s,), t):
                continue
            nxt = table.value(i + 1, (s + 1,))
            stay = table.value(i + 1, (s,))
            tau = stay - nxt
            acc[i, s] = sum(pa for v, pa in d.atoms if v - shift >= tau)
    ids = np.arange(2 ** l, dtype=np.int64)
    f = np.zeros((2 ** l, smax + 1))
    f[:, 0] = 1.0
    for i in range(l):
        taken = f[:, :smax] * acc[i, :smax]
        shifted = np.zeros_like(f)
        shifted[:, 1:] = taken
        stay = f * (1.0 - acc[i])
        has = ((ids >> i) & 1).astype(bool)
        f = np.where(has[:, None], shifted, stay + shifted)
    moments = f.sum(axis=1)
    marg = np.array([moments[1 << i] for i in range(l)])
    prod = np.ones(2 ** l)
    for mask in range(1, 2 ** l):
        low = mask & (-mask)
        prod[mask] = prod[mask ^ low] * marg[low.bit_length() - 1]
    gaps = moments - prod
    worst = int(np.argmax(gaps))
    subset = tuple(elems[i] for i in range(l) if (worst >> i) & 1)
    gap = float(gaps[worst])
    return gap <= tol, subset, gap


# ---------------------------------------------------------------------------
# Counterexample search: price drops after an earlier acceptance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DependencyHit:
    tree: dict
    price_after_pick: float
    price_after_skip: float


def search_dependency_counterexample(
        dists, *, max_inner_bins: int = 2, max_root_cap: int = 5,
        max_cap: int = 3, margin: float = 1e-9, pair=(0, 1),
        chains_only: bool = False) -> list[DependencyHit]:
    """Sweep laminar structures over the given ordered element distributions
    for a pair where the optimal price to the second element is strictly
    lower after the first element is accepted than after it is skipped.

    Chains (nested prefix bins, the production shape) never produce a hit
    and serve as the negative control.  Returns every hit found.
    """
    n = len(dists)
    first, second = pair
    if chains_only:
        candidates = [frozenset(range(i + 1)) for i in range(1, n - 1)]
    else:
        candidates = [frozenset(c)
                      for size in range(2, n)
                      for c in itertools.combinations(range(n), size)]
    families = [()]
    families += [(s,) for s in candidates]
    if max_inner_bins >= 2:
        for a, b in itertools.combinations(candidates, 2):
            if a <= b or b <= a or not (a & b):
                families.append((a, b))
    hits = []
    for family in families:
        for caps in itertools.product(
                *[range(1, min(len(s), max_cap + 1)) for s in family]):
            for root_cap in range(1, max_root_cap + 1):
                tree = _family_tree(n, family, caps, root_cap)
                inst = LaminarInstance.build(dists, tree)
                hit = _conditional_price_drop(inst, first, second, margin)
                if hit is not None:
                    hits.append(DependencyHit(tree=inst.to_tree(),
                                              price_after_pick=hit[0],
                                              price_after_skip=hit[1]))
    return hits


def _family_tree(n, family, caps, root_cap):
    order = sorted(range(len(family)), key=lambda i: -len(family[i]))
    nodes = {i: {"cap": caps[i], "children": []} for i in range(len(family))}
    placed_elem = {}
    placed_bin = {}
    for i in order:  # largest first so nesting lands on the tightest parent
        holder = None
        for j in order:
            if j == i or not (family[i] < family[j]):
                continue
            if holder is None or len(family[j]) < len(family[holder]):
                holder = j
        placed_bin[i] = holder
    root = {"cap": root_cap, "children": []}
    for i in order:
        target = root if placed_bin[i] is None else nodes[placed_bin[i]]
        target["children"].append(nodes[i])
    for e in range(n):
        holder = None
        for i in range(len(family)):
            if e in family[i]:
                if holder is None or len(family[i]) < len(family[holder]):
                    holder = i
        target = root if holder is None else nodes[holder]
        target["children"].append({"element": e})
    return root


def _conditional_price_drop(inst, first, second, margin):
    _, policy = solve_full_dp(inst)
    dyn = BinSubproblem(inst, 0)
    s0 = dyn.initial
    tau1, p1 = policy.rule(first, s0)
    acc = inst.dists[first].tail_above(tau1) + p1 * inst.dists[first].prob_at(tau1)
    if not (0.0 < acc < 1.0):
        return None  # conditioning on both outcomes needs both possible
    if not dyn.can_pick(s0, first):
        return None
    s_pick = dyn.pick(s0, first)
    tau_pick = policy.rule(second, s_pick)[0]
    tau_skip = policy.rule(second, s0)[0]
    if tau_pick < tau_skip - margin:
        return tau_pick, tau_skip
    return None
