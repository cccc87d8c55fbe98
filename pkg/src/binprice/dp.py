"""Exact finite-horizon dynamic programs over capacity states.

``solve_full_dp`` runs backward induction over the full (possibly
exponential) remaining-capacity state space of a laminar instance and
extracts the optimal threshold policy: at time ``t`` in state ``s`` the
price is the marginal continuation value of one unit of capacity,
``V[t+1](s) - V[t+1](s after pick)``, with acceptance at equality.

``solve_subproblem_dp`` solves one per-type chain of a production instance
on the polynomial sold-count state space, optionally with every value
shifted by a constant; the checkpoint guard skips buyers whose day's
cumulative production is already sold out.  ``concavity_check`` tests the
discrete concavity of such a table in the sold count, which is what makes
the chain's prices monotone in past sales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .model import (
    DEFAULT_STATE_CAP,
    BinSubproblem,
    LaminarInstance,
    ProductionInstance,
    TypeSubproblem,
    reachable_profile,
)
from .rounding import PricingPolicy


@dataclass
class ValueTable:
    """Expected-future-welfare table of one sub-problem.

    ``entries`` maps ``(level, state)`` to the optimal expected welfare from
    that arrival on; ``positions[level]`` is the global arrival index (the
    last level is the post-horizon point).  Only feasible states are stored:
    a missing key is the infeasible sentinel.
    """

    scope: str
    positions: tuple
    entries: dict = field(default_factory=dict)
    shift: float = 0.0

    @property
    def num_levels(self) -> int:
        return len(self.positions)

    def value(self, level, state):
        return self.entries.get((level, state))

    @property
    def optimal(self) -> float:
        first = min(lvl for lvl, _ in self.entries)
        states = [s for lvl, s in self.entries if lvl == first]
        return max(self.entries[(first, s)] for s in states)

    def to_json_dict(self) -> dict:
        return {
            "scope": self.scope,
            "shift": self.shift,
            "values": {f"{self.positions[lvl]},{list(s)}": v
                       for (lvl, s), v in sorted(self.entries.items())},
        }


def solve_full_dp(inst: LaminarInstance, *,
                  state_cap=DEFAULT_STATE_CAP) -> tuple[ValueTable, PricingPolicy]:
    """Backward induction over the full remaining-capacity state space.

    Returns the value table and the extracted pricing policy (accept at
    equality).  States where the arriving element cannot be picked quote an
    infinite price.
    """
    dyn = BinSubproblem(inst, 0)
    levels, _ = reachable_profile(dyn, state_cap)
    n = len(dyn.elements)
    entries = {(n, s): 0.0 for s in levels[n]}
    rules = {}
    for i in range(n - 1, -1, -1):
        t = dyn.elements[i]
        atoms = inst.dists[t].atoms
        for s in levels[i]:
            stay = entries[(i + 1, s)]
            if dyn.can_pick(s, t):
                cont = entries[(i + 1, dyn.pick(s, t))]
                tau = stay - cont
                ev = 0.0
                for v, p in atoms:
                    ev += p * ((v + cont) if v >= tau else stay)
                entries[(i, s)] = ev
                rules[(t, s)] = (tau, 1.0)
            else:
                entries[(i, s)] = stay
                rules[(t, s)] = (math.inf, 0.0)
    table = ValueTable(scope=dyn.key, positions=tuple(dyn.elements) + (n,),
                       entries=entries)
    return table, PricingPolicy(scope=dyn.key, rules=rules)


def solve_subproblem_dp(p: ProductionInstance, type_index: int,
                        shift: float = 0.0, *,
                        state_cap=DEFAULT_STATE_CAP) -> ValueTable:
    """Chain DP for one type with all values shifted by ``shift``.

    The skip option keeps values non-increasing over time; a buyer whose
    day cap is exhausted (checkpoint guard) is passed over unchanged.
    """
    dyn = TypeSubproblem(p, type_index)
    levels, _ = reachable_profile(dyn, state_cap)
    l = len(dyn.elements)
    entries = {(l, s): 0.0 for s in levels[l]}
    for i in range(l - 1, -1, -1):
        t = dyn.elements[i]
        atoms = p.dists[t].atoms
        for s in levels[i]:
            stay = entries[(i + 1, s)]
            if dyn.can_pick(s, t):
                cont = entries[(i + 1, dyn.pick(s, t))]
                tau = stay - cont
                ev = 0.0
                for v, prob in atoms:
                    shifted = v - shift
                    ev += prob * ((shifted + cont) if shifted >= tau else stay)
                entries[(i, s)] = ev
            else:
                entries[(i, s)] = stay
    return ValueTable(scope=dyn.key, positions=tuple(dyn.elements) + (l,),
                      entries=entries, shift=shift)


def chain_policy(table: ValueTable, p: ProductionInstance,
                 type_index: int) -> PricingPolicy:
    """Thresholds of the optimal chain policy, on unshifted buyer values."""
    dyn = TypeSubproblem(p, type_index)
    rules = {}
    for (lvl, s), _ in table.entries.items():
        if lvl >= len(dyn.elements):
            continue
        t = dyn.elements[lvl]
        if dyn.can_pick(s, t):
            tau = (table.entries[(lvl + 1, s)]
                   - table.entries[(lvl + 1, dyn.pick(s, t))])
            rules[(t, s)] = (tau + table.shift, 1.0)
        else:
            rules[(t, s)] = (math.inf, 0.0)
    return PricingPolicy(scope=dyn.key, rules=rules)


def concavity_check(table: ValueTable, tol: float = 1e-9):
    """Check ``D(s) + D(s+2) <= 2 D(s+1) + tol`` at every level of a chain table.

    Returns ``(ok, worst)`` where ``worst`` is ``(position, sold, gap)`` for
    the largest violation, or ``None`` when every triple passes.
    """
    worst = None
    worst_gap = tol
    for (lvl, s) in table.entries:
        if len(s) != 1:
            raise ValueError("concavity check applies to chain tables only")
        mid = table.value(lvl, (s[0] + 1,))
        hi = table.value(lvl, (s[0] + 2,))
        if mid is None or hi is None:
            continue
        gap = table.entries[(lvl, s)] + hi - 2.0 * mid
        if gap > worst_gap:
            worst_gap = gap
            worst = (table.positions[lvl], s[0], gap)
    return worst is None, worst
