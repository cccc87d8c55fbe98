"""Near-optimal policy construction with capacity scaling.

Both schemes trade a ``(1 - eps)`` haircut on the relaxed capacities for
concentration slack.  The accuracy knob ``eps`` fixes the granularity
``delta = eps^2 / ln(1/eps)`` (natural log; overridable for desk-scale
experiments that want the expectation-constrained branch at modest
capacities).

Production: when the shipping capacity is at most ``1/delta`` the full
exact LP is affordable and its rounding is the optimal policy; otherwise
the ex-ante LP is solved at shipping capacity scaled by ``1 - eps`` and the
per-type pricings run behind a hard counter at the *original* capacity.

Laminar: the depth marking picks the point-wise/expectation split, the
hierarchy LP is solved with large capacities scaled by ``1 - eps``, and the
per-small-bin pricings run behind hard counters at the original large
capacities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import (
    DEFAULT_STATE_CAP,
    InstanceError,
    LaminarInstance,
    Marking,
    ProductionInstance,
    production_to_laminar,
    validate,
)
from . import lp as lpmod
from .rounding import compose_policies, extract_all, extract_pricing, mark_laminar

EPSILON_MAX = 0.99


def delta_of(epsilon: float) -> float:
    """Granularity schedule ``eps^2 / ln(1/eps)``."""
    if not (0.0 < epsilon < EPSILON_MAX):
        raise ValueError(f"epsilon must be in (0, {EPSILON_MAX})")
    return epsilon ** 2 / math.log(1.0 / epsilon)


@dataclass(frozen=True)
class PtasConfig:
    """Accuracy knob plus optional granularity override."""

    epsilon: float
    delta: float | None = None

    def __post_init__(self):
        if not (0.0 < self.epsilon < EPSILON_MAX):
            raise ValueError(f"epsilon must be in (0, {EPSILON_MAX})")
        if self.delta is not None and not (0.0 < self.delta < 1.0):
            raise ValueError("delta override must be in (0, 1)")

    @property
    def resolved_delta(self) -> float:
        return self.delta if self.delta is not None else delta_of(self.epsilon)

    @property
    def capacity_scale(self) -> float:
        return 1.0 - self.epsilon


@dataclass
class PtasResult:
    policy: object
    branch: str  # "small" (exact) or "large" (scaled ex-ante)
    objective: float
    lp_kind: str
    marking: Marking | None = None

    def marking_summary(self) -> dict:
        if self.marking is None:
            return {}
        return {"large": sorted(self.marking.large),
                "small_maximal": sorted(self.marking.small_maximal),
                "small_all": sorted(self.marking.small_all)}


def ptas_production(p: ProductionInstance, cfg: PtasConfig, *,
                    state_cap=DEFAULT_STATE_CAP, engine="auto") -> PtasResult:
    errs = validate(p)
    if errs:
        raise InstanceError(errs)
    delta = cfg.resolved_delta
    if p.shipping <= 1.0 / delta:
        lam = production_to_laminar(p)
        built = lpmod.build_lp_optimal(lam, state_cap=state_cap)
        sol = lpmod.solve_optimal(built.model, engine)
        policy = extract_pricing(sol, built, "root")
        return PtasResult(policy=policy, branch="small",
                          objective=sol.objective, lp_kind="optimal")
    built = lpmod.build_lp_exante(p, cfg.capacity_scale, state_cap=state_cap)
    sol = lpmod.solve_optimal(built.model, engine)
    policies = extract_all(sol, built)
    policy = compose_policies(p, policies)
    return PtasResult(policy=policy, branch="large",
                      objective=sol.objective, lp_kind="exante")


def ptas_laminar(inst: LaminarInstance, cfg: PtasConfig, *,
                 state_cap=DEFAULT_STATE_CAP, engine="auto") -> PtasResult:
    errs = validate(inst)
    if errs:
        raise InstanceError(errs)
    mk = mark_laminar(inst, cfg.resolved_delta)
    built = lpmod.build_lp_hierarchy(inst, mk, cfg.capacity_scale,
                                     state_cap=state_cap)
    sol = lpmod.solve_optimal(built.model, engine)
    policies = extract_all(sol, built)
    policy = compose_policies(inst, policies, mk)
    branch = "large" if mk.large else "small"
    return PtasResult(policy=policy, branch=branch, objective=sol.objective,
                      lp_kind="hierarchy", marking=mk)
