"""Shared corpus generators and independent oracles.

Expected values in the tests come from the oracles here (brute-force
enumeration, hand recursions, chord-maximum hulls, vertex enumeration),
never from the code paths they check.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

import numpy as np
import pytest

from binprice import (
    DiscreteDistribution,
    LaminarInstance,
    ProductionInstance,
    production_to_laminar,
)

VALUE_GRID = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0]


def random_distribution(rng: random.Random, max_atoms=3,
                        grid=VALUE_GRID) -> DiscreteDistribution:
    k = rng.randint(1, max_atoms)
    vals = sorted(rng.sample(grid, k))
    cuts = sorted(rng.sample(range(1, 8), k - 1))
    probs, last = [], 0
    for c in cuts + [8]:
        probs.append((c - last) / 8.0)  # eighths sum to 1 exactly
        last = c
    return DiscreteDistribution.of(zip(vals, probs))


def random_production(rng: random.Random, n_max=6, m_max=3, cap_max=3,
                      days_max=1) -> ProductionInstance:
    n = rng.choices(range(1, n_max + 1), weights=[1, 2, 3, 3, 2, 2][:n_max])[0]
    m = rng.randint(1, m_max)
    types = tuple(rng.randrange(m) for _ in range(n))
    T = rng.randint(1, days_max)
    day_list = sorted(rng.randrange(T) for _ in range(n))
    prod = []
    for _ in range(m):
        col = [rng.randint(0, cap_max)]
        for _ in range(T - 1):
            col.append(min(cap_max, col[-1] + rng.randint(0, 2)))
        prod.append(tuple(col))
    return ProductionInstance(
        dists=tuple(random_distribution(rng) for _ in range(n)),
        types=types, days=tuple(day_list),
        production=tuple(prod), shipping=rng.randint(1, cap_max))


def random_laminar(rng: random.Random, n_max=6, cap_max=3) -> LaminarInstance:
    n = rng.choices(range(2, n_max + 1), weights=[2, 3, 3, 2, 2][:n_max - 1])[0]
    elems = list(range(n))
    rng.shuffle(elems)
    n_bins = rng.randint(0, min(3, n // 2))
    children = []
    pos = 0
    for _ in range(n_bins):
        size = rng.randint(1, max(1, (n - pos) // 2))
        group = elems[pos:pos + size]
        pos += size
        if group:
            children.append({"cap": rng.randint(0, cap_max),
                             "children": [{"element": e} for e in group]})
    children += [{"element": e} for e in elems[pos:]]
    tree = {"cap": rng.randint(1, cap_max), "children": children}
    return LaminarInstance.build(
        tuple(random_distribution(rng) for _ in range(n)), tree)


@dataclass
class CorpusEntry:
    name: str
    laminar: LaminarInstance
    production: ProductionInstance | None


def build_corpus(seed=202408, size=200) -> list[CorpusEntry]:
    rng = random.Random(seed)
    entries = []
    for i in range(size):
        if i % 5 < 3:
            p = random_production(rng)
            entries.append(CorpusEntry(f"prod{i}", production_to_laminar(p), p))
        else:
            entries.append(CorpusEntry(f"lam{i}", random_laminar(rng), None))
    return entries


@pytest.fixture(scope="session")
def corpus():
    return build_corpus()


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def oracle_states(inst: LaminarInstance, b: int):
    """Reachable local states by brute force: remaining-capacity vectors of
    every independent subset of the bin's elements."""
    bins = inst.subtree_bins(b)
    index = {x: i for i, x in enumerate(bins)}
    elems = sorted(inst.bin_elements(b))
    caps = [inst.bin_caps[x] for x in bins]
    coords = {e: [index[x] for x in inst.elem_ancestors(e) if x in index]
              for e in elems}
    out = set()
    for r in range(len(elems) + 1):
        for sub in itertools.combinations(elems, r):
            rem = caps.copy()
            ok = True
            for e in sub:
                for i in coords[e]:
                    rem[i] -= 1
                    if rem[i] < 0:
                        ok = False
            if ok:
                out.add(tuple(rem))
    return out


def oracle_forbidden(inst: LaminarInstance, b: int):
    bins = inst.subtree_bins(b)
    index = {x: i for i, x in enumerate(bins)}
    elems = sorted(inst.bin_elements(b))
    coords = {e: [index[x] for x in inst.elem_ancestors(e) if x in index]
              for e in elems}
    out = set()
    for state in oracle_states(inst, b):
        for e in elems:
            if any(state[i] == 0 for i in coords[e]):
                s = list(state)
                for i in coords[e]:
                    s[i] -= 1
                out.add(tuple(s))
    return out


def oracle_chain_joint(p: ProductionInstance, type_index: int, taus):
    """Joint acceptance distribution of a chain threshold policy by walking
    every value path.  ``taus[i]`` is the (threshold, accept-at-equality)
    price faced at position i given the current sold count s: taus[i][s].

    Returns dict bitmask -> probability.
    """
    buyers = p.buyers_of_type(type_index)
    joint = {}

    def walk(i, sold, mask, prob):
        if i == len(buyers):
            joint[mask] = joint.get(mask, 0.0) + prob
            return
        t = buyers[i]
        cap = p.available(type_index, p.days[t])
        for v, pa in p.dists[t].atoms:
            tau = taus[i].get(sold)
            if tau is not None and sold < cap and v >= tau:
                walk(i + 1, sold + 1, mask | (1 << i), prob * pa)
            else:
                walk(i + 1, sold, mask, prob * pa)

    walk(0, 0, 0, 1.0)
    return joint


def oracle_hull_slopes(points):
    """Upper concave envelope by chord maxima: R(q) = max over point pairs of
    the chord through them evaluated at q."""

    def envelope(q):
        best = -float("inf")
        for (x0, y0), (x1, y1) in itertools.combinations(points, 2):
            if min(x0, x1) <= q <= max(x0, x1) and x0 != x1:
                lam = (q - x0) / (x1 - x0)
                best = max(best, y0 + lam * (y1 - y0))
        for (x, y) in points:
            if x == q:
                best = max(best, y)
        return best

    return envelope


def oracle_lp_vertices(c, a_ub, b_ub, a_eq, b_eq):
    """Best vertex of {A_ub x <= b_ub, A_eq x = b_eq, x >= 0} by enumerating
    basic solutions; assumes a bounded feasible region."""
    c = np.asarray(c, dtype=float)
    n = c.size
    rows = []
    rhs = []
    for row, b in zip(a_ub, b_ub):
        rows.append(np.asarray(row, dtype=float))
        rhs.append((b, "<="))
    for row, b in zip(a_eq, b_eq):
        rows.append(np.asarray(row, dtype=float))
        rhs.append((b, "="))
    for i in range(n):
        e = np.zeros(n)
        e[i] = -1.0
        rows.append(e)
        rhs.append((0.0, "<="))
    best = None
    m = len(rows)
    for combo in itertools.combinations(range(m), n):
        A = np.array([rows[i] for i in combo])
        b = np.array([rhs[i][0] for i in combo])
        if abs(np.linalg.det(A)) < 1e-9:
            continue
        x = np.linalg.solve(A, b)
        ok = (x >= -1e-9).all()
        for row, (bb, rel) in zip(rows, rhs):
            v = row @ x
            if rel == "<=" and v > bb + 1e-9:
                ok = False
            if rel == "=" and abs(v - bb) > 1e-9:
                ok = False
            if not ok:
                break
        if ok:
            val = c @ x
            if best is None or val > best:
                best = val
    return best
