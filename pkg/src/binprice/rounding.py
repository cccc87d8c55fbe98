"""LP solutions to executable posted-price policies, and laminar marking.

An adaptive pricing policy with randomized tie-breaking quotes a
state-dependent threshold: values strictly above are accepted, strictly
below rejected, and a value equal to the threshold is accepted with an
independent coin of bias ``p``.  ``extract_pricing`` computes, per
(arrival, state) with positive state probability, the minimum support value
whose strict tail fits under the target conditional acceptance rate
``z = E[X*(s, v)] / Y*(s)`` and the coin bias that makes up the difference,
so that forward-evaluating the policy reproduces the LP's state
probabilities exactly.

``mark_laminar`` implements the depth rule: a bin at depth ``d`` of an
``L``-deep tree is small iff its capacity is at most ``(1/delta)**(L-d)``,
and smallness is inherited downward.  ``compose_policies`` dispatches each
arriving element to its covering small sub-problem while hard counters on
the large bins quote infinity the moment any enclosing capacity is spent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .model import (
    InstanceError,
    LaminarInstance,
    Marking,
    marking_violations,
    small_units,
)
from . import lp as lpmod


class RoundingError(RuntimeError):
    """An LP assignment too inconsistent to price (corrupt solution)."""


@dataclass(frozen=True)
class PricingPolicy:
    """Threshold rules for one sub-problem.

    ``rules`` maps ``(arrival index, local state)`` to ``(tau, p)``;
    ``tau = inf`` means the arrival is never served from that state.  The
    executor additionally quotes infinity whenever the local capacities
    cannot absorb a pick, so exhausted states are safe even under solver
    round-off.
    """

    scope: str
    rules: dict

    def rule(self, t, state):
        return self.rules.get((t, state))

    def to_json_dict(self) -> dict:
        items = []
        for (t, state), (tau, p) in sorted(self.rules.items()):
            items.append({"t": t, "state": list(state),
                          "tau": "inf" if math.isinf(tau) else tau, "p": p})
        return {"scope": self.scope, "rules": items}

    @classmethod
    def from_json_dict(cls, doc) -> "PricingPolicy":
        rules = {}
        for item in doc["rules"]:
            tau = item["tau"]
            tau = math.inf if tau == "inf" else float(tau)
            rules[(item["t"], tuple(item["state"]))] = (tau, float(item["p"]))
        return cls(scope=doc["scope"], rules=rules)


@dataclass(frozen=True)
class ComposedPolicy:
    """Per-small-sub-problem policies behind hard large-capacity counters.

    ``counter_caps`` holds the original (unscaled) capacities; an element is
    quoted infinity whenever any of its ``counter_keys`` has been used up.
    """

    blocks: dict
    element_block: dict
    counter_caps: dict
    counter_keys: dict

    @property
    def scope(self) -> str:
        return "composed"

    def to_json_dict(self) -> dict:
        return {
            "scope": "composed",
            "blocks": {k: v.to_json_dict() for k, v in sorted(self.blocks.items())},
            "element_block": {str(e): k
                              for e, k in sorted(self.element_block.items())},
            "counter_caps": dict(sorted(self.counter_caps.items())),
            "counter_keys": {str(e): list(keys)
                             for e, keys in sorted(self.counter_keys.items())},
        }

    @classmethod
    def from_json_dict(cls, doc) -> "ComposedPolicy":
        return cls(
            blocks={k: PricingPolicy.from_json_dict(v)
                    for k, v in doc["blocks"].items()},
            element_block={int(e): k for e, k in doc["element_block"].items()},
            counter_caps=dict(doc["counter_caps"]),
            counter_keys={int(e): tuple(keys)
                          for e, keys in doc["counter_keys"].items()},
        )


def policy_to_json(policy) -> str:
    return json.dumps(policy.to_json_dict(), indent=2, sort_keys=True) + "\n"


def policy_from_json(text: str):
    doc = json.loads(text)
    if not isinstance(doc, dict) or "scope" not in doc:
        raise InstanceError("policy: document must carry a scope")
    if doc["scope"] == "composed":
        return ComposedPolicy.from_json_dict(doc)
    return PricingPolicy.from_json_dict(doc)


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------

Y_FLOOR = 1e-9


def extract_pricing(sol, built, key) -> PricingPolicy:
    """Price one block of a solved LP.

    States whose probability is below ``Y_FLOOR`` quote infinity; elsewhere
    the threshold is the smallest support value with ``Pr[v > tau] <= z``
    and the tie coin makes the conditional acceptance exactly ``z``.
    """
    info = built.block(key)
    dists = built.instance.dists
    rules = {}
    for lvl, t in enumerate(info.elements):
        atoms = dists[t].atoms
        for s in info.levels[lvl]:
            y = sol.value(lpmod.y_name(key, t, s))
            if y <= Y_FLOOR:
                rules[(t, s)] = (math.inf, 0.0)
                continue
            ex = sum(pa * sol.value(lpmod.xc_name(key, t, s, a))
                     for a, (_, pa) in enumerate(atoms))
            z = ex / y
            if z < -1e-9 or (ex > y * (1.0 + 1e-9) + 1e-9):
                raise RoundingError(
                    f"corrupt LP solution at t={t}, state={s}: z={z!r}")
            z = min(max(z, 0.0), 1.0)
            rules[(t, s)] = _price_for_rate(atoms, z)
    return PricingPolicy(scope=key, rules=rules)


def _price_for_rate(atoms, z):
    """Minimum support threshold and tie bias hitting acceptance rate ``z``."""
    tails = [0.0] * len(atoms)  # strict tail above each atom
    for a in range(len(atoms) - 2, -1, -1):
        tails[a] = tails[a + 1] + atoms[a + 1][1]
    for a, (v, pa) in enumerate(atoms):
        if tails[a] <= z:
            p = (z - tails[a]) / pa
            return (v, min(max(p, 0.0), 1.0))
    # z below even the top atom's (zero) strict tail cannot happen; guard:
    return (math.inf, 0.0)


def extract_all(sol, built) -> dict:
    return {key: extract_pricing(sol, built, key) for key in built.blocks}


# ---------------------------------------------------------------------------
# Marking
# ---------------------------------------------------------------------------


def mark_laminar(inst: LaminarInstance, delta: float) -> Marking:
    """Depth-based marking: small iff capacity fits within ``(1/delta)**(L-d)``.

    The boundary is inclusive, and every descendant of a small bin is small,
    so each large bin's capacity exceeds ``1/delta`` times the capacity
    bound of any small child.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must be in (0, 1)")
    L = inst.depth
    inv = 1.0 / delta
    small = set()
    for b in range(inst.num_bins):  # pre-order: parents precede children
        parent = inst.bin_parents[b]
        if parent is not None and parent in small:
            small.add(b)
            continue
        bound = inv ** (L - inst.bin_depth[b])
        if inst.bin_caps[b] <= bound * (1.0 + 1e-12):
            small.add(b)
    large = frozenset(range(inst.num_bins)) - small
    maximal = frozenset(b for b in small
                        if inst.bin_parents[b] is None
                        or inst.bin_parents[b] not in small)
    return Marking(large=frozenset(large), small_maximal=maximal,
                   small_all=frozenset(small))


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------


def compose_policies(inst, policies: dict, mk: Marking | None = None,
                     counter_caps: dict | None = None) -> ComposedPolicy:
    """Bundle per-sub-problem policies behind the large-capacity counters.

    For a laminar instance the counters are the marking's large bins at
    their original capacities; for a production instance with per-type
    policies the single counter is the shipping capacity.  Every element
    must be covered by exactly one policy scope.
    """
    if isinstance(inst, LaminarInstance):
        if mk is None:
            raise ValueError("laminar composition requires a marking")
        errs = marking_violations(inst, mk)
        if errs:
            raise InstanceError(errs)
        units = small_units(inst, mk)
        missing = [k for k in units if k not in policies]
        if missing:
            raise InstanceError([f"policy: no pricing for sub-problem {k}"
                                 for k in missing])
        element_block = {}
        for key in units:
            if key.startswith("elem:"):
                element_block[int(key.split(":")[1])] = key
            else:
                b = 0 if key == "root" else int(key.split(":")[1])
                for e in inst.bin_elements(b):
                    element_block[e] = key
        uncovered = [e for e in range(inst.num_elements)
                     if e not in element_block]
        if uncovered:
            raise InstanceError(
                [f"policy: element {e} not covered by any small sub-problem"
                 for e in uncovered])
        caps = {f"bin:{b}": (inst.bin_caps[b] if counter_caps is None
                             else counter_caps[f"bin:{b}"])
                for b in sorted(mk.large)}
        keys = {e: tuple(f"bin:{b}" for b in inst.elem_ancestors(e)
                         if b in mk.large)
                for e in range(inst.num_elements)}
        return ComposedPolicy(blocks=dict(policies),
                              element_block=element_block,
                              counter_caps=caps, counter_keys=keys)
    # production: one chain policy per type, one hard shipping counter
    element_block = {}
    for key, pol in policies.items():
        if not key.startswith("type:"):
            raise InstanceError(f"policy: unexpected scope {key} for production")
        j = int(key.split(":")[1])
        for t in inst.buyers_of_type(j):
            element_block[t] = key
    uncovered = [t for t in range(inst.num_buyers) if t not in element_block]
    if uncovered:
        raise InstanceError([f"policy: buyer {t} not covered by any type policy"
                             for t in uncovered])
    caps = {"shipping": inst.shipping if counter_caps is None
            else counter_caps["shipping"]}
    keys = {t: ("shipping",) for t in range(inst.num_buyers)}
    return ComposedPolicy(blocks=dict(policies), element_block=element_block,
                          counter_caps=caps, counter_keys=keys)
