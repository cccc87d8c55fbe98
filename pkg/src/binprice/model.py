"""Instance representations for capacity-constrained Bayesian online selection.

Two canonical problem forms live here:

* ``ProductionInstance`` -- buyers of ``m`` product types arrive in a fixed
  order over ``T`` days; cumulative production of each type caps per-type
  sales day by day, and a global shipping capacity ``K`` caps total sales.

* ``LaminarInstance`` -- elements arrive in a fixed order and a laminar
  family of capacitated bins (a tree whose internal nodes are bins and whose
  leaves are the elements) restricts which subsets may be selected.

Every production instance converts into an equivalent laminar instance
(``production_to_laminar``): one nested chain of bins per type, all inside a
root bin carrying the shipping capacity.

The module also provides the sub-problem *dynamics* used by the dynamic
programs, LP builders and policy executors: local states are tuples
(remaining capacities of the bins of one sub-tree, or a single sold count for
a per-type chain), together with reachable-state enumeration and the
forbidden neighboring states that are exactly one over-acceptance away from a
feasible state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

PROB_TOL = 1e-12
DEFAULT_STATE_CAP = 10 ** 6


class InstanceError(ValueError):
    """A malformed instance document or in-memory instance."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SizingError(RuntimeError):
    """A state enumeration exceeded the configured cap."""

    def __init__(self, scope, size, cap):
        self.scope = scope
        self.size = size
        self.cap = cap
        super().__init__(f"state space of {scope} exceeds cap ({size} > {cap})")


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite value distribution given as (value, probability) atoms.

    Atoms are sorted strictly ascending by value and probabilities sum to 1.
    Values may be negative; shifted sub-problem solves rely on that.
    """

    atoms: tuple[tuple[float, float], ...]

    @classmethod
    def of(cls, pairs) -> "DiscreteDistribution":
        return cls(tuple((float(v), float(p)) for v, p in pairs))

    @classmethod
    def point(cls, value) -> "DiscreteDistribution":
        return cls(((float(value), 1.0),))

    @classmethod
    def uniform(cls, values) -> "DiscreteDistribution":
        vals = sorted(float(v) for v in values)
        p = 1.0 / len(vals)
        return cls(tuple((v, p) for v in vals))

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(v for v, _ in self.atoms)

    @property
    def probs(self) -> tuple[float, ...]:
        return tuple(p for _, p in self.atoms)

    def expectation(self) -> float:
        return sum(v * p for v, p in self.atoms)

    def tail_above(self, x) -> float:
        """Pr[v > x]."""
        return sum(p for v, p in self.atoms if v > x)

    def prob_at(self, x) -> float:
        """Pr[v = x]; nonzero only at atoms."""
        return sum(p for v, p in self.atoms if v == x)

    def shifted(self, offset) -> "DiscreteDistribution":
        return DiscreteDistribution(tuple((v - offset, p) for v, p in self.atoms))

    def max_value(self) -> float:
        return self.atoms[-1][0]


def distribution_violations(dist, where="dist"):
    out = []
    if not isinstance(dist, DiscreteDistribution) or not dist.atoms:
        return [f"{where}: empty or missing distribution"]
    total = sum(p for _, p in dist.atoms)
    if abs(total - 1.0) > PROB_TOL:
        out.append(f"{where}: probabilities sum {total!r} != 1")
    for v, p in dist.atoms:
        if not (0.0 < p <= 1.0):
            out.append(f"{where}: probability {p!r} outside (0,1] at value {v!r}")
    vals = [v for v, _ in dist.atoms]
    if any(b <= a for a, b in zip(vals, vals[1:])):
        out.append(f"{where}: values not strictly increasing")
    return out


# ---------------------------------------------------------------------------
# Production instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProductionInstance:
    """Buyers arrive in order; per-type cumulative production plus a global
    shipping capacity restrict sales.

    All indices are 0-based: ``types[t]`` in ``[0, num_types)``, ``days[t]``
    in ``[0, num_days)`` and non-decreasing, ``production[j][i]`` is the
    cumulative number of type-``j`` units available from the start of day
    ``i`` (non-decreasing in ``i``).
    """

    dists: tuple[DiscreteDistribution, ...]
    types: tuple[int, ...]
    days: tuple[int, ...]
    production: tuple[tuple[int, ...], ...]
    shipping: int

    @property
    def num_buyers(self) -> int:
        return len(self.dists)

    @property
    def num_types(self) -> int:
        return len(self.production)

    @property
    def num_days(self) -> int:
        return len(self.production[0]) if self.production else 0

    def buyers_of_type(self, j) -> tuple[int, ...]:
        return tuple(t for t in range(self.num_buyers) if self.types[t] == j)

    def available(self, j, day) -> int:
        return self.production[j][day]


def _production_violations(p: ProductionInstance):
    out = []
    n = p.num_buyers
    if n == 0:
        out.append("elements: instance has no buyers")
    for t, d in enumerate(p.dists):
        out.extend(distribution_violations(d, f"elements[{t}].dist"))
    if len(p.types) != n:
        out.append(f"types: length {len(p.types)} != {n} buyers")
    if len(p.days) != n:
        out.append(f"days: length {len(p.days)} != {n} buyers")
    m = p.num_types
    if m == 0:
        out.append("production: no types")
    lens = {len(col) for col in p.production}
    if len(lens) > 1:
        out.append("production: ragged day columns")
    T = p.num_days
    for t, j in enumerate(p.types):
        if not isinstance(j, int) or not (0 <= j < m):
            out.append(f"types[{t}]: {j!r} outside [0,{m})")
    for t, i in enumerate(p.days):
        if not isinstance(i, int) or not (0 <= i < T):
            out.append(f"days[{t}]: {i!r} outside [0,{T})")
    if any(b < a for a, b in zip(p.days, p.days[1:])):
        out.append("days: not non-decreasing over arrivals")
    for j, col in enumerate(p.production):
        if any((not isinstance(k, int)) or k < 0 for k in col):
            out.append(f"production[{j}]: capacities must be non-negative integers")
        if any(b < a for a, b in zip(col, col[1:])):
            out.append(f"production[{j}]: cumulative units not non-decreasing")
    if not isinstance(p.shipping, int) or p.shipping < 0:
        out.append(f"shipping: {p.shipping!r} must be a non-negative integer")
    return out


# ---------------------------------------------------------------------------
# Laminar instances
# ---------------------------------------------------------------------------


class LaminarInstance:
    """Ordered elements under a tree of capacitated bins.

    Bins are numbered in pre-order with the root at id 0.  Construction
    normalizes the tree: child capacities are clamped to their parent's,
    bins with no elements are dropped, and a parent whose member set equals
    its single child's is collapsed into that child (keeping the smaller
    capacity).  Instances are immutable once built.
    """

    def __init__(self, dists, bin_caps, bin_parents, bin_child_bins,
                 bin_child_elems):
        self.dists = tuple(dists)
        self.bin_caps = tuple(bin_caps)
        self.bin_parents = tuple(bin_parents)
        self.bin_child_bins = tuple(tuple(c) for c in bin_child_bins)
        self.bin_child_elems = tuple(tuple(e) for e in bin_child_elems)
        nb = len(self.bin_caps)
        elem_bin = {}
        for b in range(nb):
            for e in self.bin_child_elems[b]:
                elem_bin[e] = b
        self.elem_bin = tuple(elem_bin[e] for e in range(len(self.dists)))
        depth = [0] * nb
        for b in range(1, nb):
            depth[b] = depth[self.bin_parents[b]] + 1
        self.bin_depth = tuple(depth)
        members = [set(self.bin_child_elems[b]) for b in range(nb)]
        for b in range(nb - 1, 0, -1):
            members[self.bin_parents[b]] |= members[b]
        self._members = tuple(frozenset(s) for s in members)

    @classmethod
    def build(cls, dists, tree) -> "LaminarInstance":
        """Build from a nested ``{"cap": int, "children": [...]}`` spec with
        ``{"element": idx}`` leaves; applies normalization."""
        dists = tuple(dists)
        n = len(dists)
        node = _check_tree(tree, n)
        node = _clamp_caps(node, None)
        node = _drop_empty(node)
        if node is None:
            raise InstanceError("bins: root bin has no elements")
        node = _collapse(node)
        caps, parents, child_bins, child_elems = [], [], [], []

        def flatten(nd, parent):
            b = len(caps)
            caps.append(nd["cap"])
            parents.append(parent)
            child_bins.append([])
            child_elems.append(list(nd["elems"]))
            for kid in nd["bins"]:
                cb = flatten(kid, b)
                child_bins[b].append(cb)
            return b

        flatten(node, None)
        return cls(dists, caps, parents, child_bins, child_elems)

    # -- basic accessors ----------------------------------------------------

    @property
    def num_elements(self) -> int:
        return len(self.dists)

    @property
    def num_bins(self) -> int:
        return len(self.bin_caps)

    def bin_elements(self, b) -> frozenset:
        """All elements below bin ``b``."""
        return self._members[b]

    def elem_ancestors(self, e) -> tuple[int, ...]:
        """Bins containing element ``e``, innermost first, root last."""
        out = []
        b = self.elem_bin[e]
        while b is not None:
            out.append(b)
            b = self.bin_parents[b]
        return tuple(out)

    def subtree_bins(self, b) -> tuple[int, ...]:
        """Bins of the sub-tree rooted at ``b``, in pre-order."""
        out = []
        stack = [b]
        while stack:
            cur = stack.pop()
            out.append(cur)
            stack.extend(reversed(self.bin_child_bins[cur]))
        return tuple(out)

    @property
    def depth(self) -> int:
        """Tree depth counting element leaves (root at 0)."""
        return 1 + max(self.bin_depth[self.elem_bin[e]]
                       for e in range(self.num_elements))

    def to_tree(self) -> dict:
        def emit(b):
            children = [{"element": e} for e in sorted(self.bin_child_elems[b])]
            children += [emit(c) for c in self.bin_child_bins[b]]
            return {"cap": self.bin_caps[b], "children": children}

        return emit(0)


def _check_tree(node, n, seen=None, top=True):
    if seen is None:
        seen = set()
    if not isinstance(node, dict):
        raise InstanceError(f"bins: node {node!r} is not an object")
    if set(node.keys()) != {"cap", "children"}:
        raise InstanceError(
            f"bins: node keys {sorted(node.keys())} != ['cap', 'children']")
    cap = node["cap"]
    if not isinstance(cap, int) or isinstance(cap, bool) or cap < 0:
        raise InstanceError(f"bins: cap {cap!r} must be a non-negative integer")
    kids = node["children"]
    if not isinstance(kids, list):
        raise InstanceError("bins: children must be a list")
    elems, bins = [], []
    for kid in kids:
        if isinstance(kid, dict) and set(kid.keys()) == {"element"}:
            e = kid["element"]
            if not isinstance(e, int) or isinstance(e, bool) or not (0 <= e < n):
                raise InstanceError(f"bins: element index {e!r} outside [0,{n})")
            if e in seen:
                raise InstanceError(f"bins: element {e} appears in multiple leaves")
            seen.add(e)
            elems.append(e)
        else:
            bins.append(_check_tree(kid, n, seen, top=False))
    if top and len(seen) != n:
        missing = sorted(set(range(n)) - seen)
        raise InstanceError(f"bins: elements {missing} missing from the tree")
    return {"cap": cap, "elems": elems, "bins": bins}


def _clamp_caps(node, parent_cap):
    cap = node["cap"] if parent_cap is None else min(node["cap"], parent_cap)
    return {"cap": cap, "elems": node["elems"],
            "bins": [_clamp_caps(b, cap) for b in node["bins"]]}


def _drop_empty(node):
    bins = [b for b in (_drop_empty(k) for k in node["bins"]) if b is not None]
    if not node["elems"] and not bins:
        return None
    return {"cap": node["cap"], "elems": node["elems"], "bins": bins}


def _collapse(node):
    bins = [_collapse(b) for b in node["bins"]]
    if not node["elems"] and len(bins) == 1:
        # identical member sets: keep the child (its cap is the min after clamping)
        return bins[0]
    return {"cap": node["cap"], "elems": node["elems"], "bins": bins}


def _laminar_violations(inst: LaminarInstance):
    out = []
    if inst.num_elements == 0:
        out.append("elements: instance has no elements")
    for t, d in enumerate(inst.dists):
        out.extend(distribution_violations(d, f"elements[{t}].dist"))
    for b in range(inst.num_bins):
        cap = inst.bin_caps[b]
        if not isinstance(cap, int) or cap < 0:
            out.append(f"bins[{b}].cap: {cap!r} must be a non-negative integer")
        parent = inst.bin_parents[b]
        if parent is not None and cap > inst.bin_caps[parent]:
            out.append(f"bins[{b}].cap: {cap} exceeds parent bin cap "
                       f"{inst.bin_caps[parent]}")
    if inst.num_bins and len(inst.bin_elements(0)) != inst.num_elements:
        out.append("bins: root bin does not contain all elements")
    return out


def validate(instance) -> list[str]:
    """Return a list of invariant violations; empty iff the instance is valid."""
    if isinstance(instance, ProductionInstance):
        return _production_violations(instance)
    if isinstance(instance, LaminarInstance):
        return _laminar_violations(instance)
    return [f"instance: unsupported type {type(instance).__name__}"]


# ---------------------------------------------------------------------------
# Production -> laminar conversion
# ---------------------------------------------------------------------------


def production_to_laminar(p: ProductionInstance) -> LaminarInstance:
    """Encode production/shipping constraints as nested capacity bins.

    The root bin carries the shipping capacity; each type contributes a chain
    of nested bins, one per production day, holding the buyers that have
    arrived by that day.  Day levels without new arrivals collapse away
    (keeping the smaller capacity), which the generic normalization does.
    """
    errs = validate(p)
    if errs:
        raise InstanceError(errs)
    children = []
    for j in range(p.num_types):
        buyers = p.buyers_of_type(j)
        if not buyers:
            continue
        node = None
        for day in range(p.num_days):
            here = [{"element": t} for t in buyers if p.days[t] == day]
            kids = ([node] if node is not None else []) + here
            if not kids:
                continue
            node = {"cap": p.production[j][day], "children": kids}
        children.append(node)
    tree = {"cap": p.shipping, "children": children}
    return LaminarInstance.build(p.dists, tree)


def as_laminar(instance) -> LaminarInstance:
    if isinstance(instance, LaminarInstance):
        return instance
    return production_to_laminar(instance)


# ---------------------------------------------------------------------------
# Sub-problem dynamics and state spaces
# ---------------------------------------------------------------------------


class BinSubproblem:
    """Selection dynamics inside one bin's sub-tree.

    States are tuples of remaining capacities of the sub-tree's bins in
    pre-order; picking an element decrements every bin on its path.
    """

    def __init__(self, inst: LaminarInstance, root_bin: int):
        self.key = "root" if root_bin == 0 else f"bin:{root_bin}"
        self.bins = inst.subtree_bins(root_bin)
        index = {b: i for i, b in enumerate(self.bins)}
        self.elements = tuple(sorted(inst.bin_elements(root_bin)))
        self.initial = tuple(inst.bin_caps[b] for b in self.bins)
        self._coords = {
            e: tuple(index[b] for b in inst.elem_ancestors(e) if b in index)
            for e in self.elements
        }

    def can_pick(self, state, e) -> bool:
        return all(state[i] > 0 for i in self._coords[e])

    def pick(self, state, e):
        s = list(state)
        for i in self._coords[e]:
            s[i] -= 1
        return tuple(s)

    def unpick(self, state, e):
        s = list(state)
        for i in self._coords[e]:
            s[i] += 1
        return tuple(s)


class TypeSubproblem:
    """Per-type chain dynamics for a production instance.

    States are single sold counts ``(s,)``; buyer ``t`` can be served iff the
    cumulative production of its type by its day exceeds ``s``.
    """

    def __init__(self, p: ProductionInstance, type_index: int):
        self.key = f"type:{type_index}"
        self.elements = p.buyers_of_type(type_index)
        self.initial = (0,)
        self._cap_at = {t: p.available(type_index, p.days[t])
                        for t in self.elements}

    def cap_at(self, e) -> int:
        return self._cap_at[e]

    def can_pick(self, state, e) -> bool:
        return state[0] < self._cap_at[e]

    def pick(self, state, e):
        return (state[0] + 1,)

    def unpick(self, state, e):
        return (state[0] - 1,) if state[0] > 0 else None


class SingletonSubproblem:
    """Trivial dynamics for a single element with no local capacity."""

    def __init__(self, element: int):
        self.key = f"elem:{element}"
        self.elements = (element,)
        self.initial = ()

    def can_pick(self, state, e) -> bool:
        return True

    def pick(self, state, e):
        return ()

    def unpick(self, state, e):
        return ()


def bind_dynamics(scope: str, instance):
    """Reconstruct the dynamics behind a policy scope key."""
    if scope == "root" or scope.startswith("bin:"):
        inst = as_laminar(instance)
        b = 0 if scope == "root" else int(scope.split(":", 1)[1])
        if b >= inst.num_bins:
            raise InstanceError(f"scope {scope}: no such bin")
        return BinSubproblem(inst, b)
    if scope.startswith("type:"):
        if not isinstance(instance, ProductionInstance):
            raise InstanceError(f"scope {scope}: requires a production instance")
        return TypeSubproblem(instance, int(scope.split(":", 1)[1]))
    if scope.startswith("elem:"):
        return SingletonSubproblem(int(scope.split(":", 1)[1]))
    raise InstanceError(f"scope {scope!r}: unknown policy scope")


def reachable_profile(dyn, state_cap=DEFAULT_STATE_CAP):
    """Per-arrival reachable state sets and forbidden one-over-pick targets.

    Returns ``(levels, forbidden)``: ``levels[i]`` are the states reachable
    just before the block's i-th arrival (``levels[-1]`` after the last one),
    ``forbidden[i]`` the infeasible states produced by an infeasible pick at
    arrival ``i-1`` from a then-reachable state.
    """
    levels = [[dyn.initial]]
    forbidden = [[]]
    cur = {dyn.initial}
    total = {dyn.initial}
    for e in dyn.elements:
        nxt = set(cur)
        bad = set()
        for s in cur:
            target = dyn.pick(s, e)
            if dyn.can_pick(s, e):
                nxt.add(target)
            else:
                bad.add(target)
        total |= nxt
        if len(total) > state_cap:
            raise SizingError(dyn.key, len(total), state_cap)
        levels.append(sorted(nxt))
        forbidden.append(sorted(bad))
        cur = nxt
    return levels, forbidden


def local_state_space(inst: LaminarInstance, b: int,
                      state_cap=DEFAULT_STATE_CAP) -> set:
    """All local states of sub-problem ``b`` reachable by some feasible policy."""
    levels, _ = reachable_profile(BinSubproblem(inst, b), state_cap)
    return set().union(*map(set, levels))


def forbidden_neighbors(inst: LaminarInstance, b: int,
                        state_cap=DEFAULT_STATE_CAP) -> set:
    """Infeasible local states one over-acceptance away from a feasible one."""
    dyn = BinSubproblem(inst, b)
    feasible = local_state_space(inst, b, state_cap)
    out = set()
    for s in feasible:
        for e in dyn.elements:
            if not dyn.can_pick(s, e):
                out.add(dyn.pick(s, e))
                if len(out) > state_cap:
                    raise SizingError(dyn.key, len(out), state_cap)
    return out


# ---------------------------------------------------------------------------
# Markings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Marking:
    """Partition of bins into large (capacity held in expectation) and small
    (capacity held point-wise).

    Smallness is inherited by descendants.  ``small_maximal`` holds the
    small bins whose parent is large (or that are the root); elements under
    no small bin at all form implicit singleton sub-problems.
    """

    large: frozenset
    small_maximal: frozenset
    small_all: frozenset

    @classmethod
    def all_small(cls, inst: LaminarInstance) -> "Marking":
        return cls(frozenset(), frozenset({0}),
                   frozenset(range(inst.num_bins)))

    @classmethod
    def all_large(cls, inst: LaminarInstance) -> "Marking":
        return cls(frozenset(range(inst.num_bins)), frozenset(), frozenset())


def marking_violations(inst: LaminarInstance, mk: Marking) -> list[str]:
    out = []
    bins = set(range(inst.num_bins))
    if mk.large | mk.small_all != bins or mk.large & mk.small_all:
        out.append("marking: large/small do not partition the bins")
    for b in mk.small_all:
        parent = inst.bin_parents[b]
        if parent is not None and parent in mk.small_all and b in mk.small_maximal:
            out.append(f"marking: bin {b} marked maximal under a small parent")
        for c in inst.bin_child_bins[b]:
            if c not in mk.small_all:
                out.append(f"marking: bin {c} is large under small bin {b}")
    expect_maximal = {b for b in mk.small_all
                      if inst.bin_parents[b] is None
                      or inst.bin_parents[b] not in mk.small_all}
    if expect_maximal != set(mk.small_maximal):
        out.append("marking: small_maximal does not match the maximal small bins")
    return out


def small_units(inst: LaminarInstance, mk: Marking) -> list[str]:
    """Scope keys of the point-wise sub-problems induced by a marking.

    Maximal small bins plus implicit singletons for elements all of whose
    bins are large; together they partition the element set.
    """
    units = []
    covered = set()
    for b in sorted(mk.small_maximal):
        units.append("root" if b == 0 else f"bin:{b}")
        covered |= inst.bin_elements(b)
    for e in range(inst.num_elements):
        if e not in covered:
            units.append(f"elem:{e}")
    return units


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------


def parse_instance(doc) -> ProductionInstance | LaminarInstance:
    """Parse one instance document; unknown fields are rejected."""
    if not isinstance(doc, dict):
        raise InstanceError("instance: document must be an object")
    kind = doc.get("kind")
    if kind == "production":
        allowed = {"kind", "elements", "types", "days", "production", "shipping"}
    elif kind == "laminar":
        allowed = {"kind", "elements", "bins"}
    else:
        raise InstanceError(f"kind: {kind!r} not one of 'production', 'laminar'")
    unknown = set(doc.keys()) - allowed
    if unknown:
        raise InstanceError(f"instance: unknown fields {sorted(unknown)}")
    missing = allowed - set(doc.keys())
    if missing:
        raise InstanceError(f"instance: missing fields {sorted(missing)}")
    dists = _parse_elements(doc["elements"])
    if kind == "production":
        prod = doc["production"]
        if not isinstance(prod, dict):
            raise InstanceError("production: must map type index to day counts")
        by_type = {}
        for key, col in prod.items():
            try:
                j = int(key)
            except (TypeError, ValueError):
                raise InstanceError(f"production: bad type key {key!r}") from None
            if not isinstance(col, list):
                raise InstanceError(f"production[{key}]: must be a list")
            by_type[j] = tuple(col)
        if sorted(by_type) != list(range(len(by_type))):
            raise InstanceError("production: type keys must be 0..m-1")
        types = doc["types"]
        days = doc["days"]
        if not isinstance(types, list) or not isinstance(days, list):
            raise InstanceError("types/days: must be lists")
        inst = ProductionInstance(
            dists=dists,
            types=tuple(types),
            days=tuple(days),
            production=tuple(by_type[j] for j in range(len(by_type))),
            shipping=doc["shipping"],
        )
        errs = validate(inst)
        if errs:
            raise InstanceError(errs)
        return inst
    inst = LaminarInstance.build(dists, doc["bins"])
    errs = validate(inst)
    if errs:
        raise InstanceError(errs)
    return inst


def _parse_elements(elements):
    if not isinstance(elements, list) or not elements:
        raise InstanceError("elements: must be a non-empty list")
    dists = []
    for t, entry in enumerate(elements):
        if not isinstance(entry, dict) or set(entry.keys()) != {"dist"}:
            raise InstanceError(f"elements[{t}]: expected an object with key 'dist'")
        pairs = entry["dist"]
        if (not isinstance(pairs, list)
                or any(not isinstance(a, list) or len(a) != 2 for a in pairs)):
            raise InstanceError(f"elements[{t}].dist: expected [[value,prob],...]")
        dists.append(DiscreteDistribution.of(pairs))
    return tuple(dists)


def serialize_instance(instance) -> dict:
    elements = [{"dist": [[v, p] for v, p in d.atoms]} for d in instance.dists]
    if isinstance(instance, ProductionInstance):
        return {
            "kind": "production",
            "elements": elements,
            "types": list(instance.types),
            "days": list(instance.days),
            "production": {str(j): list(col)
                           for j, col in enumerate(instance.production)},
            "shipping": instance.shipping,
        }
    return {"kind": "laminar", "elements": elements, "bins": instance.to_tree()}


def load_instance(path) -> ProductionInstance | LaminarInstance:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"instance: invalid JSON ({exc})") from None
    return parse_instance(doc)


def dump_instance(instance, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(serialize_instance(instance), fh, indent=2, sort_keys=True)
        fh.write("\n")
