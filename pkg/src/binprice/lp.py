"""Linear programs over policy state/allocation variables, and solvers.

Three builders share one block emitter:

* ``build_lp_optimal``   -- the exact program of the optimal online policy:
  one point-wise block over the full remaining-capacity state space.
* ``build_lp_exante``    -- per-type chain blocks coupled through expected
  served counts ``N(j)`` and an expected shipping capacity.
* ``build_lp_hierarchy`` -- one point-wise block per maximal small bin of a
  marking plus an expectation row per large bin; with everything small it
  coincides with the exact program, with everything large it degenerates to
  the pure ex-ante relaxation over singleton elements.

Each block tracks state probabilities ``Y(t,state)`` and conditional
allocations ``X(t,state,atom)`` with ``X <= Y`` rows, per-arrival state
update equalities, pinned-to-zero forbidden states, and marginal allocation
variables ``X(t,atom)`` carrying the objective.  State tracking extends one
step past the block's last arrival so that an over-acceptance at the final
step is pinned like any other.

Solvers: an in-repo dense-tableau two-phase primal simplex with Bland's
anti-cycling rule (deterministic, used at desk scale) and a scipy/HiGHS
bridge for models past a size threshold.  ``solve`` picks by model size
unless an engine is forced.

Text interchange format (``LpModel.to_text``), one token per name, all
variables non-negative::

    maximize
      + <coef> <var> ...
    subject to
      <name> : + <coef> <var> ... <=|= <rhs>
    bounds
      0 <= <var> <= inf
    end
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    DEFAULT_STATE_CAP,
    BinSubproblem,
    LaminarInstance,
    Marking,
    ProductionInstance,
    TypeSubproblem,
    InstanceError,
    bind_dynamics,
    marking_violations,
    reachable_profile,
    small_units,
    validate,
)

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_CAP = 10 ** 6
DENSE_CELL_LIMIT = 60_000


class LpError(RuntimeError):
    """Solver failure: iteration cap, tolerance blow-up, or engine error."""


# ---------------------------------------------------------------------------
# Model container
# ---------------------------------------------------------------------------


class LpModel:
    """Sparse maximize-form LP with named non-negative variables."""

    def __init__(self):
        self.names: list[str] = []
        self.index: dict[str, int] = {}
        self.objective: dict[int, float] = {}
        self.rows: list[tuple[list[tuple[int, float]], str, float]] = []

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def add_var(self, name: str) -> int:
        if name in self.index:
            raise ValueError(f"duplicate variable name {name!r}")
        idx = len(self.names)
        self.names.append(name)
        self.index[name] = idx
        return idx

    def add_objective(self, name: str, coef: float):
        idx = self.index[name]
        self.objective[idx] = self.objective.get(idx, 0.0) + coef

    def add_row(self, coeffs, rel: str, rhs: float):
        if rel not in ("<=", "="):
            raise ValueError(f"unsupported relation {rel!r}")
        merged: dict[int, float] = {}
        for name, coef in coeffs:
            idx = self.index[name]
            merged[idx] = merged.get(idx, 0.0) + coef
        self.rows.append((sorted(merged.items()), rel, rhs))

    def objective_value(self, assignment: dict[str, float]) -> float:
        return sum(coef * assignment.get(self.names[idx], 0.0)
                   for idx, coef in self.objective.items())

    def to_text(self) -> str:
        out = ["maximize"]
        terms = []
        for idx in sorted(self.objective):
            terms.append(f"{'+' if self.objective[idx] >= 0 else '-'} "
                         f"{abs(self.objective[idx])!r} {self.names[idx]}")
        out.append("  " + " ".join(terms) if terms else "  + 0.0")
        out.append("subject to")
        for i, (coeffs, rel, rhs) in enumerate(self.rows):
            terms = [f"{'+' if c >= 0 else '-'} {abs(c)!r} {self.names[j]}"
                     for j, c in coeffs]
            out.append(f"  c{i} : " + " ".join(terms) + f" {rel} {rhs!r}")
        out.append("bounds")
        for name in self.names:
            out.append(f"  0 <= {name} <= inf")
        out.append("end")
        return "\n".join(out) + "\n"


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    objective: float | None
    assignment: dict[str, float]
    engine: str
    iterations: int = 0

    def value(self, name: str, default: float = 0.0) -> float:
        return self.assignment.get(name, default)


def check_solution(model: LpModel, sol: LpSolution,
                   feas_tol: float = 1e-7, bound_tol: float = 1e-9) -> list[str]:
    """Constraint and bound residuals beyond tolerance, as messages."""
    if sol.status != "optimal":
        return [f"status {sol.status}"]
    x = np.zeros(model.num_vars)
    for name, val in sol.assignment.items():
        x[model.index[name]] = val
    out = []
    if (x < -bound_tol).any():
        j = int(np.argmin(x))
        out.append(f"variable {model.names[j]} below bound: {x[j]!r}")
    for i, (coeffs, rel, rhs) in enumerate(model.rows):
        lhs = sum(c * x[j] for j, c in coeffs)
        resid = lhs - rhs
        if rel == "<=" and resid > feas_tol:
            out.append(f"row c{i} violated by {resid!r}")
        elif rel == "=" and abs(resid) > feas_tol:
            out.append(f"row c{i} off by {resid!r}")
    return out


# ---------------------------------------------------------------------------
# Dense tableau simplex (Bland's rule, two phases)
# ---------------------------------------------------------------------------


def _solve_dense(model: LpModel) -> LpSolution:
    nv = model.num_vars
    m = model.num_rows
    n_slack = sum(1 for _, rel, _ in model.rows if rel == "<=")
    A = np.zeros((m, nv + n_slack))
    b = np.zeros(m)
    slack_col = nv
    slack_of_row = {}
    for i, (coeffs, rel, rhs) in enumerate(model.rows):
        for j, c in coeffs:
            A[i, j] = c
        b[i] = rhs
        if rel == "<=":
            A[i, slack_col] = 1.0
            slack_of_row[i] = slack_col
            slack_col += 1
    # sign-normalize so b >= 0; flipped <= rows lose their natural basis slot
    for i in range(m):
        if b[i] < 0:
            A[i, :] *= -1.0
            b[i] *= -1.0
    basis = np.full(m, -1, dtype=int)
    art_rows = []
    for i in range(m):
        s = slack_of_row.get(i)
        if s is not None and A[i, s] == 1.0:
            basis[i] = s
        else:
            art_rows.append(i)
    n_art = len(art_rows)
    ncols = nv + n_slack + n_art
    T = np.zeros((m, ncols + 1))
    T[:, :nv + n_slack] = A
    T[:, -1] = b
    for k, i in enumerate(art_rows):
        col = nv + n_slack + k
        T[i, col] = 1.0
        basis[i] = col
    art_start = nv + n_slack

    # phase-2 objective row: c_j - z_j convention (entering where > tol)
    obj2 = np.zeros(ncols + 1)
    for idx, coef in model.objective.items():
        obj2[idx] = coef
    # phase-1 row: maximize -(sum of artificials); expressed through the rows
    obj1 = np.zeros(ncols + 1)
    for i in art_rows:
        obj1 += T[i]
    obj1[art_start:ncols] = 0.0

    pivots = 0

    def pivot(row, col):
        nonlocal pivots
        piv = T[row, col]
        T[row] /= piv
        colvals = T[:, col].copy()
        colvals[row] = 0.0
        T[:] -= np.outer(colvals, T[row])
        for obj in (obj1, obj2):
            if obj[col] != 0.0:
                obj -= obj[col] * T[row]
        basis[row] = col
        pivots += 1

    def run_phase(obj, allowed_hi):
        nonlocal pivots
        while True:
            if pivots >= PIVOT_CAP:
                raise LpError(f"simplex pivot cap {PIVOT_CAP} exceeded")
            enter = -1
            for j in range(allowed_hi):  # Bland: lowest improving index
                if obj[j] > OPT_TOL:
                    enter = j
                    break
            if enter < 0:
                return "optimal"
            col = T[:, enter]
            rows = np.nonzero(col > FEAS_TOL)[0]
            if rows.size == 0:
                return "unbounded"
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + FEAS_TOL * (1.0 + abs(best))]
            leave = ties[np.argmin(basis[ties])]  # Bland on the leaving index
            pivot(leave, enter)

    if n_art:
        if run_phase(obj1, art_start) == "unbounded":
            raise LpError("phase-1 unbounded; model is inconsistent")
        infeas = obj1[-1]
        if infeas > 1e-7:
            return LpSolution("infeasible", None, {}, "simplex", pivots)
        # drive surviving artificials out of the basis or drop dead rows
        dead = []
        for i in range(m):
            if basis[i] >= art_start:
                cols = np.nonzero(np.abs(T[i, :art_start]) > FEAS_TOL)[0]
                if cols.size:
                    pivot(i, int(cols[0]))
                else:
                    dead.append(i)
        if dead:
            keep = np.array([i for i in range(m) if i not in set(dead)], dtype=int)
            T = T[keep]
            basis = basis[keep]
        T[:, art_start:ncols] = 0.0
        obj2[art_start:ncols] = 0.0

    status = run_phase(obj2, art_start)
    if status == "unbounded":
        return LpSolution("unbounded", None, {}, "simplex", pivots)
    x = np.zeros(nv + n_slack + n_art)
    for i, col in enumerate(basis):
        x[col] = T[i, -1]
    assignment = {model.names[j]: float(x[j]) for j in range(nv)}
    objective = model.objective_value(assignment)
    return LpSolution("optimal", objective, assignment, "simplex", pivots)


# ---------------------------------------------------------------------------
# HiGHS bridge
# ---------------------------------------------------------------------------


def _solve_highs(model: LpModel) -> LpSolution:
    import scipy.optimize
    import scipy.sparse as sp

    nv = model.num_vars
    c = np.zeros(nv)
    for idx, coef in model.objective.items():
        c[idx] = -coef
    ub_data, ub_i, ub_j, ub_rhs = [], [], [], []
    eq_data, eq_i, eq_j, eq_rhs = [], [], [], []
    for coeffs, rel, rhs in model.rows:
        if rel == "<=":
            r = len(ub_rhs)
            for j, co in coeffs:
                ub_i.append(r)
                ub_j.append(j)
                ub_data.append(co)
            ub_rhs.append(rhs)
        else:
            r = len(eq_rhs)
            for j, co in coeffs:
                eq_i.append(r)
                eq_j.append(j)
                eq_data.append(co)
            eq_rhs.append(rhs)
    A_ub = (sp.csr_matrix((ub_data, (ub_i, ub_j)), shape=(len(ub_rhs), nv))
            if ub_rhs else None)
    A_eq = (sp.csr_matrix((eq_data, (eq_i, eq_j)), shape=(len(eq_rhs), nv))
            if eq_rhs else None)
    res = scipy.optimize.linprog(
        c, A_ub=A_ub, b_ub=np.array(ub_rhs) if ub_rhs else None,
        A_eq=A_eq, b_eq=np.array(eq_rhs) if eq_rhs else None,
        bounds=(0, None), method="highs",
        options={"primal_feasibility_tolerance": 1e-9,
                 "dual_feasibility_tolerance": 1e-9},
    )
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 2:
        return LpSolution("infeasible", None, {}, "highs", iters)
    if res.status == 3:
        return LpSolution("unbounded", None, {}, "highs", iters)
    if res.status != 0:
        raise LpError(f"highs failed: {res.message}")
    assignment = {model.names[j]: float(res.x[j]) for j in range(nv)}
    objective = model.objective_value(assignment)
    return LpSolution("optimal", objective, assignment, "highs", iters)


def solve(model: LpModel, engine: str = "auto") -> LpSolution:
    """Solve to an optimal basic solution, or report infeasible/unbounded.

    ``auto`` uses the in-repo simplex up to ``DENSE_CELL_LIMIT`` tableau
    cells and HiGHS beyond; both are deterministic for a fixed model.
    """
    if model.num_vars == 0:
        return LpSolution("optimal", 0.0, {}, "trivial")
    if engine == "auto":
        cells = (model.num_rows + 2) * (model.num_vars + model.num_rows + 1)
        engine = "simplex" if cells <= DENSE_CELL_LIMIT else "highs"
    if engine == "simplex":
        return _solve_dense(model)
    if engine == "highs":
        return _solve_highs(model)
    raise ValueError(f"unknown engine {engine!r}")


def solve_optimal(model: LpModel, engine: str = "auto") -> LpSolution:
    sol = solve(model, engine)
    if sol.status != "optimal":
        raise LpError(f"LP not optimal: {sol.status}")
    return sol


# ---------------------------------------------------------------------------
# Variable naming shared with the rounding stage
# ---------------------------------------------------------------------------


def fmt_state(state) -> str:
    return "(" + ",".join(str(int(x)) for x in state) + ")"


def y_name(key, t, state) -> str:
    return f"Y[{key}]({t},{fmt_state(state)})"


def xc_name(key, t, state, atom) -> str:
    return f"X[{key}]({t},{fmt_state(state)},{atom})"


def xm_name(t, atom) -> str:
    return f"X({t},{atom})"


def n_name(j) -> str:
    return f"N({j})"


END = "end"


# ---------------------------------------------------------------------------
# Block emission
# ---------------------------------------------------------------------------


@dataclass
class BlockInfo:
    key: str
    dyn: object
    levels: list
    forbidden: list

    @property
    def elements(self):
        return self.dyn.elements

    def time_label(self, level):
        return self.dyn.elements[level] if level < len(self.dyn.elements) else END


@dataclass
class BuiltLp:
    """An LP plus the per-block state bookkeeping needed downstream."""

    model: LpModel
    instance: object
    blocks: dict = field(default_factory=dict)
    capacity_scale: float = 1.0
    marking: Marking | None = None

    def block(self, key) -> BlockInfo:
        return self.blocks[key]


def _emit_block(model: LpModel, dists, info: BlockInfo):
    dyn = info.dyn
    elems = dyn.elements
    L = len(elems)
    for lvl in range(L + 1):
        tlab = info.time_label(lvl)
        for s in info.levels[lvl]:
            model.add_var(y_name(info.key, tlab, s))
        for s in info.forbidden[lvl]:
            model.add_var(y_name(info.key, tlab, s))
    for lvl, t in enumerate(elems):
        n_atoms = len(dists[t].atoms)
        for s in info.levels[lvl]:
            for a in range(n_atoms):
                model.add_var(xc_name(info.key, t, s, a))
        for a in range(n_atoms):
            model.add_var(xm_name(t, a))

    model.add_row([(y_name(info.key, info.time_label(0), dyn.initial), 1.0)],
                  "=", 1.0)
    for lvl, t in enumerate(elems):
        probs = dists[t].probs
        # marginal definition and conditional caps
        for a, pa in enumerate(probs):
            row = [(xm_name(t, a), 1.0)]
            row += [(xc_name(info.key, t, s, a), -1.0) for s in info.levels[lvl]]
            model.add_row(row, "=", 0.0)
        for s in info.levels[lvl]:
            for a in range(len(probs)):
                model.add_row([(xc_name(info.key, t, s, a), 1.0),
                               (y_name(info.key, t, s), -1.0)], "<=", 0.0)
        # state updates into level lvl+1 (forbidden targets pin the picks)
        next_lab = info.time_label(lvl + 1)
        here = set(info.levels[lvl]) | set(info.forbidden[lvl])
        reach = set(info.levels[lvl])
        for s in list(info.levels[lvl + 1]) + list(info.forbidden[lvl + 1]):
            row = [(y_name(info.key, next_lab, s), 1.0)]
            if s in here:
                row.append((y_name(info.key, t, s), -1.0))
                if s in reach:
                    for a, pa in enumerate(probs):
                        row.append((xc_name(info.key, t, s, a), pa))
            src = dyn.unpick(s, t)
            if src is not None and src in reach:
                for a, pa in enumerate(probs):
                    row.append((xc_name(info.key, t, src, a), -pa))
            model.add_row(row, "=", 0.0)
        for s in info.forbidden[lvl + 1]:
            model.add_row([(y_name(info.key, next_lab, s), 1.0)], "=", 0.0)


def _objective(model: LpModel, dists, elements):
    for t in elements:
        for a, (v, pa) in enumerate(dists[t].atoms):
            model.add_objective(xm_name(t, a), pa * v)


def _block_info(dyn, state_cap) -> BlockInfo:
    levels, forbidden = reachable_profile(dyn, state_cap)
    return BlockInfo(key=dyn.key, dyn=dyn, levels=levels, forbidden=forbidden)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_lp_optimal(inst: LaminarInstance, *,
                     state_cap=DEFAULT_STATE_CAP) -> BuiltLp:
    """Exact LP of the optimal online policy over the full state space."""
    errs = validate(inst)
    if errs:
        raise InstanceError(errs)
    model = LpModel()
    info = _block_info(BinSubproblem(inst, 0), state_cap)
    _emit_block(model, inst.dists, info)
    _objective(model, inst.dists, info.elements)
    return BuiltLp(model=model, instance=inst, blocks={info.key: info})


def build_lp_exante(p: ProductionInstance, capacity_scale: float = 1.0, *,
                    state_cap=DEFAULT_STATE_CAP) -> BuiltLp:
    """Per-type point-wise blocks with the shipping capacity in expectation."""
    errs = validate(p)
    if errs:
        raise InstanceError(errs)
    if not (0.0 < capacity_scale <= 1.0):
        raise ValueError("capacity_scale must be in (0, 1]")
    model = LpModel()
    blocks = {}
    active = [j for j in range(p.num_types) if p.buyers_of_type(j)]
    for j in active:
        info = _block_info(TypeSubproblem(p, j), state_cap)
        blocks[info.key] = info
        _emit_block(model, p.dists, info)
    for j in active:
        model.add_var(n_name(j))
    for j in active:
        row = [(n_name(j), -1.0)]
        for t in blocks[f"type:{j}"].elements:
            for a, pa in enumerate(p.dists[t].probs):
                row.append((xm_name(t, a), pa))
        model.add_row(row, "<=", 0.0)
    model.add_row([(n_name(j), 1.0) for j in active], "<=",
                  capacity_scale * p.shipping)
    _objective(model, p.dists, range(p.num_buyers))
    return BuiltLp(model=model, instance=p, blocks=blocks,
                   capacity_scale=capacity_scale)


def build_lp_hierarchy(inst: LaminarInstance, mk: Marking,
                       capacity_scale: float = 1.0, *,
                       state_cap=DEFAULT_STATE_CAP) -> BuiltLp:
    """Marking-parametrized relaxation: point-wise inside maximal small bins,
    expected capacity (scaled) for large bins."""
    errs = validate(inst) + marking_violations(inst, mk)
    if errs:
        raise InstanceError(errs)
    if not (0.0 < capacity_scale <= 1.0):
        raise ValueError("capacity_scale must be in (0, 1]")
    model = LpModel()
    blocks = {}
    for key in small_units(inst, mk):
        info = _block_info(bind_dynamics(key, inst), state_cap)
        blocks[key] = info
        _emit_block(model, inst.dists, info)
    for b in sorted(mk.large):
        row = []
        for t in sorted(inst.bin_elements(b)):
            for a, pa in enumerate(inst.dists[t].probs):
                row.append((xm_name(t, a), pa))
        model.add_row(row, "<=", capacity_scale * inst.bin_caps[b])
    _objective(model, inst.dists, range(inst.num_elements))
    return BuiltLp(model=model, instance=inst, blocks=blocks,
                   capacity_scale=capacity_scale, marking=mk)
