"""Embedding of classical budget-consumption bandits into the drift model.

A knapsack-style instance (nonnegative consumptions, play stops when a budget
runs out) becomes a drift instance by shifting every consumption outcome by a
deterministic margin ``delta``: arm drifts become ``delta - consumption`` and
a synthetic idle arm with constant drift ``delta`` is prepended.  The
simulated environment starts with budget ``B - T*delta`` and the two budget
vectors stay related by ``B_sim = B_actual - (T - t_sim) * delta``.

Running any drift policy in the simulation and forwarding its non-idle pulls
to the real instance yields identical rewards (idle pulls earn nothing and
consume nothing), and the two static relaxations have equal value via the
correspondence ``p_idle = 1 - sum_x p_x``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .environment import Environment, OutcomeDistribution, _dist_pairs
from .exceptions import IllegalArm, InvalidInstance, MarginViolated
from .lp import solve_lp, solve_relaxation

_RELATION_TOL = 1e-9


class ConsumptionDistribution:
    """Finite distribution of one arm's (reward, consumption vector) outcome;
    consumptions lie in [0, 1]^m."""

    __slots__ = ("atoms", "_mean")

    def __init__(self, atoms):
        atoms = [(float(p), float(r), tuple(float(v) for v in d)) for p, r, d in atoms]
        if not atoms:
            raise InvalidInstance("consumption distribution needs at least one atom")
        total = sum(p for p, _, _ in atoms)
        if abs(total - 1.0) > 1e-12:
            raise InvalidInstance(f"atom probabilities sum to {total!r}, not 1")
        m = len(atoms[0][2])
        for p, r, cons in atoms:
            if not 0.0 <= r <= 1.0:
                raise InvalidInstance(f"reward {r} outside [0, 1]")
            if len(cons) != m or any(not 0.0 <= v <= 1.0 for v in cons):
                raise InvalidInstance(f"consumptions {cons} outside [0, 1]^m")
        self.atoms = tuple(atoms)
        mean_r = sum(p * r for p, r, _ in atoms)
        mean_c = tuple(sum(p * c[j] for p, _, c in atoms) for j in range(m))
        self._mean = (mean_r, mean_c)

    @property
    def num_resources(self) -> int:
        return len(self.atoms[0][2])

    def mean(self):
        return self._mean


@dataclass
class BwkInstance:
    """Knapsack instance plus the margin ``delta_drift`` of the embedding.

    Requires ``B/T >= delta_drift`` and every arm/resource expected
    consumption to differ from ``B/T`` by at least ``delta_drift``.
    """

    horizon: int
    budget: float
    arms: list[ConsumptionDistribution]
    delta_drift: float

    def __post_init__(self):
        if not self.arms:
            raise InvalidInstance("knapsack instance needs at least one arm")
        m = self.arms[0].num_resources
        if any(a.num_resources != m for a in self.arms):
            raise InvalidInstance("arms disagree on the number of resources")
        if self.delta_drift <= 0:
            raise MarginViolated(f"delta_drift must be positive, got {self.delta_drift}")
        rate = self.budget / self.horizon
        if rate < self.delta_drift - 1e-12:
            raise MarginViolated(
                f"B/T = {rate} is below the margin delta_drift = {self.delta_drift}"
            )
        for x, arm in enumerate(self.arms):
            _, cons = arm.mean()
            for j, cj in enumerate(cons):
                if abs(cj - rate) < self.delta_drift - 1e-12:
                    raise MarginViolated(
                        f"arm {x} resource {j}: expected consumption {cj} within "
                        f"{self.delta_drift} of B/T = {rate}"
                    )

    @property
    def num_arms(self) -> int:
        return len(self.arms)

    @property
    def num_resources(self) -> int:
        return self.arms[0].num_resources

    @classmethod
    def from_json_dict(cls, data: dict) -> "BwkInstance":
        try:
            horizon = int(data["T"])
            budget = float(data["B"])
            delta = float(data["delta_drift"])
            arm_specs = data["arms"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInstance(f"malformed knapsack JSON: {exc}") from exc
        arms = []
        for spec in arm_specs:
            reward = _dist_pairs(spec["reward"])
            cons = [_dist_pairs(c) for c in spec["consumptions"]]
            atoms = [(p, r, ()) for r, p in reward]
            for dist in cons:
                atoms = [(p * pd, r, d + (v,)) for p, r, d in atoms for v, pd in dist]
            arms.append(ConsumptionDistribution([(p, r, d) for p, r, d in atoms if p > 0]))
        return cls(horizon, budget, arms, delta)

    @classmethod
    def from_json_file(cls, path) -> "BwkInstance":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def lift(bwk: BwkInstance) -> Environment:
    """Build the simulated drift environment for a knapsack instance.

    Arm 0 is the synthetic idle arm (reward 0, deterministic drift ``delta``
    on every resource); arm x+1 mirrors knapsack arm x with each consumption
    outcome ``c`` mapped to drift ``delta - c``.  Supports are validated to
    stay within [-1, 1]; nothing is clipped.
    """
    delta = bwk.delta_drift
    m = bwk.num_resources
    idle = OutcomeDistribution([(1.0, 0.0, (delta,) * m)])
    arms = [idle]
    for dist in bwk.arms:
        shifted = []
        for p, r, cons in dist.atoms:
            drift = tuple(delta - c for c in cons)
            if any(abs(v) > 1.0 for v in drift):
                raise MarginViolated(f"shifted drift {drift} leaves [-1, 1]")
            shifted.append((p, r, drift))
        arms.append(OutcomeDistribution(shifted))
    sim_budget = bwk.budget - bwk.horizon * delta
    if sim_budget < 0:
        raise MarginViolated(f"simulated budget {sim_budget} is negative")
    return Environment(bwk.horizon, sim_budget, arms)


@dataclass
class ReductionState:
    """Clocks and budget vectors of the embedding after the last step."""

    t_actual: int
    t_sim: int
    budget_actual: tuple[float, ...]
    budget_sim: tuple[float, ...]
    stop_triggered: bool = False
    relation_max_error: float = 0.0


@dataclass
class ReductionRun:
    total_reward: float
    pulls: int
    idle_recommendations: int
    state: ReductionState
    arm_history: list[int] = field(default_factory=list, repr=False)


def run_reduction(
    bwk: BwkInstance, policy, seed: int, master_seed: int = 0, keep_history: bool = False
) -> ReductionRun:
    """Drive ``policy`` in the simulated environment, forwarding real pulls.

    The simulation consumes the exact same randomness as a plain episode of
    ``policy`` on ``lift(bwk)`` under the same (master_seed, seed) key, so
    rewards agree outcome-for-outcome with that run.  Idle recommendations
    advance only the simulated clock.  The budget relation
    ``B_sim = B_actual - (T - t_sim) * delta`` is checked every step (float
    tolerance; both sides accumulate increments).
    """
    env = lift(bwk)
    delta = bwk.delta_drift
    horizon = bwk.horizon
    m = bwk.num_resources
    sampler = env.sampler(master_seed, seed)
    rng = sampler.policy_rng()
    budget_sim = [env.budget] * m
    budget_actual = [bwk.budget] * m
    total = 0.0
    pulls = 0
    idles = 0
    t_actual = 0
    stop = False
    max_err = 0.0
    history: list[int] = []
    for t in range(horizon):
        arm = policy.select(t, budget_sim, rng)
        if arm != 0 and any(b < 1.0 for b in budget_sim):
            raise IllegalArm(f"arm {arm} chosen at simulated budgets {budget_sim}")
        reward, drifts = sampler.draw(arm)
        if keep_history:
            history.append(arm)
        if arm == 0:
            idles += 1
            for j in range(m):
                budget_sim[j] += drifts[j]
        else:
            if any(b < 1.0 for b in budget_actual):
                # cannot happen while the inner policy respects the idle rule
                stop = True
                break
            t_actual += 1
            pulls += 1
            total += reward
            for j in range(m):
                budget_actual[j] -= delta - drifts[j]
                budget_sim[j] += drifts[j]
        policy.observe(arm, reward, drifts)
        remaining = (horizon - (t + 1)) * delta
        for j in range(m):
            err = abs(budget_sim[j] - (budget_actual[j] - remaining))
            if err > max_err:
                max_err = err
        if max_err > _RELATION_TOL:
            raise InvalidInstance(f"budget relation drifted by {max_err:.3e}")
    state = ReductionState(
        t_actual=t_actual,
        t_sim=horizon if not stop else t,
        budget_actual=tuple(budget_actual),
        budget_sim=tuple(budget_sim),
        stop_triggered=stop,
        relation_max_error=max_err,
    )
    return ReductionRun(
        total_reward=total,
        pulls=pulls,
        idle_recommendations=idles,
        state=state,
        arm_history=history,
    )


def check_lp_equivalence(bwk: BwkInstance) -> tuple[float, float]:
    """Value of the knapsack relaxation vs. the lifted drift relaxation.

    The knapsack relaxation maximizes expected reward subject to expected
    consumption at most B/T per resource and total mass at most 1.  Equal
    values certify the embedding preserves the benchmark.
    """
    k = bwk.num_arms
    m = bwk.num_resources
    rate = bwk.budget / bwk.horizon
    rewards = np.array([arm.mean()[0] for arm in bwk.arms])
    cons = np.array([[arm.mean()[1][j] for arm in bwk.arms] for j in range(m)])
    a_ge = np.vstack([-cons, -np.ones((1, k))])
    b_ge = np.concatenate([np.full(m, -rate), [-1.0]])
    _, value_bwk, _ = solve_lp(rewards, a_ge=a_ge, b_ge=b_ge)
    value_lifted = solve_relaxation(lift(bwk).instance()).value
    return value_bwk, value_lifted
