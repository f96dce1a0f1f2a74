"""Decision rules for the drift-budget model.

Two families:

* Threshold policies that know the true expected outcomes.  With one resource
  the support of the relaxation has at most two arms and the policy is a
  direct case split (``CbOnePolicy``).  With several resources the policy
  keeps every binding resource near a decaying threshold by sampling
  ``p = D^-1 (b + gamma * s)``, where ``s`` flags which binding budgets sit
  below the threshold and ``gamma`` is pushed as high as the sign pattern
  allows (``CbPolicy``).

* A three-phase learner (``EtcbPolicy``) that first identifies the support
  arms and binding resources with confidence-bound (or plain empirical)
  restricted-program values, then shrinks confidence radii by round-robin,
  and finally runs the threshold policy against confidence bounds of the
  drifts instead of their true values.

Policies expose ``select(t, budgets, rng) -> arm`` and
``observe(arm, reward, drifts)``; ``t`` counts completed rounds.  The decay
threshold is ``tau = c * ln(max(T - (t+1), 1))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import Environment, PolicyRng
from .exceptions import InvalidInstance, UnclassifiableSupport
from .lp import (
    LpInstance,
    LpSolution,
    compute_constants,
    default_threshold_coefficient,
    solve_lp,
    solve_minus_arm,
    solve_minus_resource,
    solve_relaxation,
)

# Guard against solver noise when comparing two LP values that are
# mathematically equal.
VALUE_TOL = 1e-9

POLICY_IDS = ("cb1", "cb", "etcb", "etcb-empirical", "lp-sampler", "null-only")

DEFAULT_PHASE1_MIN_PULLS = 800


def threshold(c: float, horizon: int, t: int) -> float:
    """Decaying budget target for the round following ``t`` completed rounds."""
    return c * math.log(max(horizon - (t + 1), 1))


# ---------------------------------------------------------------------------
# Confidence table
# ---------------------------------------------------------------------------


class ConfidenceTable:
    """Per-arm pull counts, running mean outcomes, and confidence radii.

    The radius after n pulls is ``sqrt(8 ln(T) / n)`` (natural log).  Bounds
    are means +/- radius clipped to the outcome box [0,1] x [-1,1]^m; arm 0
    additionally uses its structural knowledge (zero reward, nonnegative
    drift).  Unsampled arms have no mean; callers substitute box extremes.
    """

    __slots__ = ("num_arms", "num_resources", "horizon", "counts", "means", "rads", "_log_t")

    def __init__(self, num_arms: int, num_resources: int, horizon: int):
        self.num_arms = num_arms
        self.num_resources = num_resources
        self.horizon = horizon
        self._log_t = math.log(horizon)
        self.counts = [0] * num_arms
        self.means = [[0.0] * (num_resources + 1) for _ in range(num_arms)]
        self.rads = [math.inf] * num_arms

    def update(self, arm: int, reward: float, drifts) -> None:
        n = self.counts[arm] + 1
        self.counts[arm] = n
        mean = self.means[arm]
        mean[0] += (reward - mean[0]) / n
        for j, d in enumerate(drifts):
            mean[j + 1] += (d - mean[j + 1]) / n
        self.rads[arm] = math.sqrt(8.0 * self._log_t / n)

    def radius(self, arm: int) -> float:
        return self.rads[arm]

    def lcb_drift(self, arm: int, j: int) -> float:
        lo = 0.0 if arm == 0 else -1.0
        if self.counts[arm] == 0:
            return lo
        return min(max(self.means[arm][j + 1] - self.rads[arm], lo), 1.0)

    def ucb_drift(self, arm: int, j: int) -> float:
        lo = 0.0 if arm == 0 else -1.0
        if self.counts[arm] == 0:
            return 1.0
        return min(max(self.means[arm][j + 1] + self.rads[arm], lo), 1.0)

    def lcb_reward(self, arm: int) -> float:
        if arm == 0:
            return 0.0
        if self.counts[arm] == 0:
            return 0.0
        return min(max(self.means[arm][0] - self.rads[arm], 0.0), 1.0)

    def ucb_reward(self, arm: int) -> float:
        if arm == 0:
            return 0.0
        if self.counts[arm] == 0:
            return 1.0
        return min(max(self.means[arm][0] + self.rads[arm], 0.0), 1.0)

    def empirical_reward(self, arm: int) -> float:
        """Empirical mean reward; optimistic box extreme when unsampled."""
        if arm == 0:
            return 0.0
        if self.counts[arm] == 0:
            return 1.0
        return self.means[arm][0]

    def empirical_drift(self, arm: int, j: int) -> float:
        if self.counts[arm] == 0:
            return 1.0
        return self.means[arm][j + 1]


def confidence_update(table: ConfidenceTable, record) -> ConfidenceTable:
    """Fold one step record into the table (mutates and returns it)."""
    table.update(record.arm, record.reward, record.drifts)
    return table


@dataclass(frozen=True)
class LpValueBounds:
    """Confidence bounds of the relaxation values derived from a table."""

    ucb_opt: float
    lcb_opt: float
    ucb_minus_arm: tuple[float, ...]
    ucb_minus_resource: tuple[float, ...]


def _bound_instance(table: ConfidenceTable, horizon: int, budget: float, upper: bool) -> LpInstance:
    k, m = table.num_arms, table.num_resources
    rewards = np.array(
        [(table.ucb_reward(x) if upper else table.lcb_reward(x)) for x in range(k)]
    )
    drifts = np.array(
        [
            [(table.ucb_drift(x, j) if upper else table.lcb_drift(x, j)) for x in range(k)]
            for j in range(m)
        ]
    )
    return LpInstance(horizon, budget, rewards, drifts, strict_null=False)


def ucb_lp_values(table: ConfidenceTable, horizon: int, budget: float) -> LpValueBounds:
    """Optimistic/pessimistic relaxation values for phase-1 identification.

    The per-resource value keeps optimistic rewards and constraints but
    charges the penalized resource's slack at its pessimistic drift, so the
    result upper-bounds the true penalized value whenever the bounds hold.
    """
    ucb_inst = _bound_instance(table, horizon, budget, upper=True)
    lcb_inst = _bound_instance(table, horizon, budget, upper=False)
    ucb_opt = solve_relaxation(ucb_inst).value
    lcb_opt = solve_relaxation(lcb_inst).value
    minus_arm = tuple(solve_minus_arm(ucb_inst, x) for x in range(table.num_arms))
    minus_res = []
    rate = budget / horizon
    ones = np.ones((1, table.num_arms))
    for j in range(table.num_resources):
        objective = ucb_inst.rewards - lcb_inst.drifts[j]
        _, value, _ = solve_lp(
            objective,
            a_ge=ucb_inst.drifts,
            b_ge=np.full(table.num_resources, -rate),
            a_eq=ones,
            b_eq=np.array([1.0]),
        )
        minus_res.append(value - rate)
    return LpValueBounds(ucb_opt, lcb_opt, minus_arm, tuple(minus_res))


def empirical_lp_values(table: ConfidenceTable, horizon: int, budget: float) -> LpValueBounds:
    """Single-table variant: plain empirical means everywhere (optimistic box
    extremes for unsampled arms), used when confidence radii are too wide for
    desk-scale identification."""
    k, m = table.num_arms, table.num_resources
    rewards = np.array([table.empirical_reward(x) for x in range(k)])
    rewards = np.clip(rewards, 0.0, 1.0)
    drifts = np.array(
        [[table.empirical_drift(x, j) for x in range(k)] for j in range(m)]
    )
    drifts = np.clip(drifts, -1.0, 1.0)
    inst = LpInstance(horizon, budget, rewards, drifts, strict_null=False)
    sol = solve_relaxation(inst)
    minus_arm = tuple(solve_minus_arm(inst, x) for x in range(k))
    minus_res = tuple(solve_minus_resource(inst, j) for j in range(m))
    return LpValueBounds(sol.value, sol.value, minus_arm, minus_res)


def identify_structure(
    values: LpValueBounds,
    known_arms: list[int],
    known_resources: list[int],
    capacity: int,
) -> None:
    """Accumulate newly separated arms/resources in place, arms first, and
    stop exactly when ``len(arms) + len(resources)`` reaches ``capacity``."""
    for x in range(len(values.ucb_minus_arm)):
        if len(known_arms) + len(known_resources) >= capacity:
            return
        if x not in known_arms and values.ucb_minus_arm[x] < values.lcb_opt - VALUE_TOL:
            known_arms.append(x)
    for j in range(len(values.ucb_minus_resource)):
        if len(known_arms) + len(known_resources) >= capacity:
            return
        if j not in known_resources and values.ucb_minus_resource[j] < values.lcb_opt - VALUE_TOL:
            known_resources.append(j)


# ---------------------------------------------------------------------------
# One-resource threshold policy
# ---------------------------------------------------------------------------

POSITIVE_ONLY = "positive_only"
NULL_PLUS_NEGATIVE = "null_plus_negative"
POSITIVE_PLUS_NEGATIVE = "positive_plus_negative"


@dataclass(frozen=True)
class CbOneConfig:
    case: str
    positive_arm: int | None
    negative_arm: int | None
    c: float


def cb1_classify(sol: LpSolution, instance: LpInstance, c: float) -> CbOneConfig:
    """Map a one-resource solution onto the three playable support patterns."""
    if instance.num_resources != 1:
        raise InvalidInstance("single-resource classification needs m == 1")
    drift = instance.drifts[0]
    support = sol.support
    if len(support) == 1:
        (x,) = support
        if x == 0 or drift[x] > 0:
            return CbOneConfig(POSITIVE_ONLY, x, None, c)
        raise UnclassifiableSupport(f"lone support arm {x} has nonpositive drift")
    if len(support) == 2:
        a, b = support
        if a == 0:
            if drift[b] < 0:
                return CbOneConfig(NULL_PLUS_NEGATIVE, None, b, c)
            raise UnclassifiableSupport("idle arm paired with a nonnegative-drift arm")
        if drift[a] > 0 and drift[b] < 0:
            return CbOneConfig(POSITIVE_PLUS_NEGATIVE, a, b, c)
        if drift[a] < 0 and drift[b] > 0:
            return CbOneConfig(POSITIVE_PLUS_NEGATIVE, b, a, c)
        raise UnclassifiableSupport(f"support arms {support} lack a +/- drift split")
    raise UnclassifiableSupport(f"support {support} has more than two arms")


def cb1_select(cfg: CbOneConfig, horizon: int, t: int, budgets) -> int:
    """Arm choice of the one-resource threshold policy; always legal."""
    b = budgets[0]
    if b < 1.0:
        return 0
    if cfg.case == POSITIVE_ONLY:
        return cfg.positive_arm
    tau = threshold(cfg.c, horizon, t)
    if cfg.case == NULL_PLUS_NEGATIVE:
        return 0 if b < tau else cfg.negative_arm
    if b < tau:
        return cfg.positive_arm
    return cfg.negative_arm


class CbOnePolicy:
    """One-resource threshold policy bound to a horizon."""

    __slots__ = ("cfg", "horizon", "_c", "_case", "_xp", "_xn")

    def __init__(self, cfg: CbOneConfig, horizon: int):
        self.cfg = cfg
        self.horizon = horizon
        self._c = cfg.c
        self._case = cfg.case
        self._xp = cfg.positive_arm
        self._xn = cfg.negative_arm

    def select(self, t: int, budgets, rng: PolicyRng) -> int:
        b = budgets[0]
        if b < 1.0:
            return 0
        case = self._case
        if case == POSITIVE_ONLY:
            return self._xp
        tau = self._c * math.log(max(self.horizon - t - 1, 1))
        if case == NULL_PLUS_NEGATIVE:
            return 0 if b < tau else self._xn
        if b < tau:
            return self._xp
        return self._xn

    def observe(self, arm: int, reward: float, drifts) -> None:
        pass


# ---------------------------------------------------------------------------
# General threshold policy
# ---------------------------------------------------------------------------


@dataclass
class CbConfig:
    """Restricted basis system and true drifts the general policy plays from.

    ``d``/``b`` come straight from the solved relaxation; ``drifts_support``
    restricts the full drift matrix to the support columns (used for the
    non-binding margin constraints).
    """

    support: tuple[int, ...]
    binding: tuple[int, ...]
    d: np.ndarray
    b: np.ndarray
    drifts_support: np.ndarray
    c: float
    gamma_star: float

    def __post_init__(self):
        det = np.linalg.det(self.d)
        if abs(det) <= 1e-10:
            raise InvalidInstance(f"restricted basis matrix is singular (det={det:.2e})")
        self.d_inv = np.linalg.inv(self.d)
        self.base_point = self.d_inv @ self.b


def cb_config(
    instance: LpInstance, sol: LpSolution, c: float, gamma_star: float = float("nan")
) -> CbConfig:
    d, b = sol.restricted_system()
    return CbConfig(
        support=sol.support,
        binding=sol.binding,
        d=d,
        b=b,
        drifts_support=instance.drifts[:, list(sol.support)],
        c=c,
        gamma_star=gamma_star,
    )


def cb_build_signs(cfg: CbConfig, budgets, tau: float) -> tuple[int, ...]:
    """+1 per binding row whose budget sits below the threshold, -1 above,
    and a trailing 0 for the sum-to-one row."""
    return tuple(1 if budgets[j] < tau else -1 for j in cfg.binding) + (0,)


def cb_solve_gamma(
    cfg: CbConfig, signs: tuple[int, ...], flagged: tuple[int, ...] = ()
) -> tuple[float, np.ndarray, bool]:
    """Largest margin gamma in [0, 1] for a sign pattern.

    Feasible gammas form an interval: the mix ``p(gamma) = D^-1 (b + gamma s)``
    must stay nonnegative (upper breakpoints) and every flagged non-binding
    resource needs drift at least gamma/2 under p(gamma), which contributes an
    upper or *lower* breakpoint depending on how its drift responds to gamma.

    On instances with a strictly positive slack margin the interval is always
    nonempty.  Without that margin the flagged constraints can be jointly
    unsatisfiable; the policy then keeps steering the binding resources (the
    nonnegativity interval alone) and reports ``feasible=False``.
    """
    direction = cfg.d_inv @ np.asarray(signs, dtype=float)
    base = cfg.base_point
    hi_p = 1.0
    for i in range(base.shape[0]):
        u = direction[i]
        if u < -1e-14:
            hi_p = min(hi_p, base[i] / -u)
    lo = 0.0
    hi = hi_p
    feasible = True
    for j in flagged:
        row = cfg.drifts_support[j]
        f0 = float(row @ base)
        slope = float(row @ direction) - 0.5
        if slope > 1e-14:
            if f0 < 0:
                lo = max(lo, -f0 / slope)
        elif slope < -1e-14:
            hi = min(hi, f0 / -slope)
        elif f0 < -1e-12:
            feasible = False
    if hi < lo - 1e-12 or hi < -1e-12:
        feasible = False
    if not feasible:
        return max(hi_p, 0.0), base + max(hi_p, 0.0) * direction, False
    gamma = max(hi, 0.0)
    return gamma, base + gamma * direction, True


class CbPolicy:
    """General threshold policy: sample ``D^-1 (b + gamma_t s_t)``.

    The gamma optimization depends only on the sign pattern and the flagged
    non-binding set, so solved mixes are cached per pattern.
    """

    __slots__ = (
        "cfg",
        "horizon",
        "_c",
        "_binding",
        "_nonbinding",
        "_support",
        "_cache",
        "infeasible_rounds",
    )

    def __init__(self, cfg: CbConfig, horizon: int, num_resources: int):
        self.cfg = cfg
        self.horizon = horizon
        self._c = cfg.c
        self._binding = cfg.binding
        self._nonbinding = tuple(j for j in range(num_resources) if j not in cfg.binding)
        self._support = cfg.support
        self._cache: dict[tuple[int, int], tuple[list[float], int | None, bool]] = {}
        self.infeasible_rounds = 0

    def _mix_for(self, s_mask: int, f_mask: int):
        key = (s_mask, f_mask)
        hit = self._cache.get(key)
        if hit is None:
            signs = tuple(
                1 if s_mask & (1 << i) else -1 for i in range(len(self._binding))
            ) + (0,)
            flagged = tuple(
                j for i, j in enumerate(self._nonbinding) if f_mask & (1 << i)
            )
            _, p, feasible = cb_solve_gamma(self.cfg, signs, flagged)
            cum = []
            acc = 0.0
            for v in p:
                acc += max(float(v), 0.0)
                cum.append(acc)
            cum[-1] = max(cum[-1], 1.0)
            point = None
            for i, v in enumerate(p):
                if v > 1.0 - 1e-12:
                    point = self._support[i]
            hit = (cum, point, feasible)
            self._cache[key] = hit
        return hit

    def select(self, t: int, budgets, rng: PolicyRng) -> int:
        for b in budgets:
            if b < 1.0:
                return 0
        tau = self._c * math.log(max(self.horizon - t - 1, 1))
        s_mask = 0
        for i, j in enumerate(self._binding):
            if budgets[j] < tau:
                s_mask |= 1 << i
        f_mask = 0
        for i, j in enumerate(self._nonbinding):
            if budgets[j] < tau:
                f_mask |= 1 << i
        cum, point, feasible = self._mix_for(s_mask, f_mask)
        if not feasible:
            self.infeasible_rounds += 1
        if point is not None:
            return point
        u = rng.uniform()
        support = self._support
        for i, edge in enumerate(cum):
            if u < edge:
                return support[i]
        return support[-1]

    def observe(self, arm: int, reward: float, drifts) -> None:
        pass


# ---------------------------------------------------------------------------
# Maximin helper for the learning policy's final phase
# ---------------------------------------------------------------------------


def maximize_min_linear(rows: list[list[float]]) -> tuple[float, list[float]]:
    """max over the probability simplex of the minimum of linear forms.

    Exact: closed form for a single row or two columns, a small dense LP
    otherwise.  Ties break toward the lowest index, so results are
    deterministic.
    """
    q = len(rows)
    n = len(rows[0])
    if q == 1:
        row = rows[0]
        best = max(row)
        i = row.index(best)
        p = [0.0] * n
        p[i] = 1.0
        return best, p
    if n == 1:
        return min(r[0] for r in rows), [1.0]
    if n == 2:
        candidates = [0.0, 1.0]
        for a in range(q):
            for b in range(a + 1, q):
                denom = (rows[a][0] - rows[a][1]) - (rows[b][0] - rows[b][1])
                if abs(denom) > 1e-14:
                    x = (rows[b][1] - rows[a][1]) / denom
                    if 0.0 < x < 1.0:
                        candidates.append(x)
        best_val = -math.inf
        best_x = 0.0
        for x in candidates:
            val = min(r[0] * x + r[1] * (1.0 - x) for r in rows)
            if val > best_val + 1e-15:
                best_val = val
                best_x = x
        return best_val, [best_x, 1.0 - best_x]
    # variables: p_0..p_{n-1}, t+, t-; maximize t+ - t-
    objective = np.zeros(n + 2)
    objective[n] = 1.0
    objective[n + 1] = -1.0
    a_ge = np.zeros((q, n + 2))
    for i, row in enumerate(rows):
        a_ge[i, :n] = row
        a_ge[i, n] = -1.0
        a_ge[i, n + 1] = 1.0
    a_eq = np.zeros((1, n + 2))
    a_eq[0, :n] = 1.0
    x, value, _ = solve_lp(objective, a_ge=a_ge, b_ge=np.zeros(q), a_eq=a_eq, b_eq=np.array([1.0]))
    return value, [float(v) for v in x[:n]]


# ---------------------------------------------------------------------------
# Three-phase learner
# ---------------------------------------------------------------------------


class EtcbPolicy:
    """Explore (identify structure), shrink radii, then control budgets.

    ``gamma_star`` must be supplied: the phase-2 pull target is
    ``32 ln(T) / gamma_star^2`` per identified arm.  Theory sets it to the
    instance's true drift margin, which the learner cannot know; experiments
    default to that true value and sweeps may override it.

    ``variant`` selects the phase-1 identification statistics: ``"ucb"`` uses
    confidence-bound values (sound, but hopeless at desk-scale horizons) and
    ``"empirical"`` plugs in raw empirical means.  Margin-free empirical
    comparisons are only meaningful once means have settled, so the empirical
    variant defers identification until every non-idle arm has
    ``phase1_min_pulls`` samples.
    """

    def __init__(
        self,
        num_arms: int,
        num_resources: int,
        horizon: int,
        budget: float,
        gamma_star: float,
        c: float,
        variant: str = "ucb",
        phase1_min_pulls: int = DEFAULT_PHASE1_MIN_PULLS,
    ):
        if variant not in ("ucb", "empirical"):
            raise InvalidInstance(f"unknown phase-1 variant {variant!r}")
        self.num_arms = num_arms
        self.num_resources = num_resources
        self.horizon = horizon
        self.budget = budget
        self.gamma_star = gamma_star
        self.c = c
        self.variant = variant
        self.phase1_min_pulls = phase1_min_pulls
        self.table = ConfidenceTable(num_arms, num_resources, horizon)
        self.phase = 1
        self.identified_arms: list[int] = []
        self.identified_resources: list[int] = []
        self.binding: tuple[int, ...] = ()
        self.phase1_end: int | None = None
        self.phase2_end: int | None = None
        self.phase3_infeasible = 0
        self._cursor = 0
        self._support: list[int] = []
        self._pending_round = 0
        if gamma_star > 0 and math.isfinite(gamma_star):
            self._phase2_target = 32.0 * math.log(horizon) / (gamma_star * gamma_star)
        else:
            self._phase2_target = math.inf
        if num_arms == 1:
            self._finish_phase1(at_round=0, arms=[0])

    # -- phase transitions ---------------------------------------------------

    def _finish_phase1(self, at_round: int, arms: list[int] | None = None) -> None:
        self.phase1_end = at_round
        support = sorted(arms if arms is not None else self.identified_arms)
        self._support = support
        self.binding = tuple(
            j for j in range(self.num_resources) if j not in self.identified_resources
        )
        self.phase = 2
        self._cursor = 0

    def _finish_phase2(self, at_round: int) -> None:
        self.phase2_end = at_round
        self.phase = 3

    def _phase2_done(self) -> bool:
        counts = self.table.counts
        return all(counts[x] >= self._phase2_target for x in self._support)

    # -- selection -----------------------------------------------------------

    def select(self, t: int, budgets, rng: PolicyRng) -> int:
        self._pending_round = t + 1
        if self.phase == 1 and t >= self.horizon - self.num_arms:
            self._finish_phase1(at_round=t)
        if self.phase == 2 and (
            self._phase2_done() or t >= self.horizon - max(len(self._support), 1)
        ):
            self._finish_phase2(at_round=t)
        for b in budgets:
            if b < 1.0:
                return 0
        if self.phase == 1:
            arm = 1 + self._cursor % (self.num_arms - 1)
            self._cursor += 1
            return arm
        if self.phase == 2:
            if not self._support:
                self._finish_phase2(at_round=t)
                return self._select_control(t, budgets, rng)
            arm = self._support[self._cursor % len(self._support)]
            self._cursor += 1
            return arm
        return self._select_control(t, budgets, rng)

    def _constraint_rows(self, budgets, tau: float) -> list[list[float]]:
        table = self.table
        support = self._support
        rows = []
        for j in self.binding:
            if budgets[j] < tau:
                rows.append([table.lcb_drift(x, j) for x in support])
            else:
                rows.append([-table.ucb_drift(x, j) for x in support])
        for j in range(self.num_resources):
            if j not in self.binding and budgets[j] < tau:
                rows.append([table.lcb_drift(x, j) for x in support])
        return rows

    def _select_control(self, t: int, budgets, rng: PolicyRng) -> int:
        support = self._support
        if not support:
            return 0
        if len(support) == 1:
            return support[0]
        tau = self.c * math.log(max(self.horizon - t - 1, 1))
        rows = self._constraint_rows(budgets, tau)
        if not rows:
            # nothing to steer: any support mix is admissible at full margin
            arm = support[self._cursor % len(support)]
            self._cursor += 1
            return arm
        value, weights = maximize_min_linear(rows)
        if value < 0.0:
            self.phase3_infeasible += 1
        best = max(weights)
        if best > 1.0 - 1e-12:
            return support[weights.index(best)]
        u = rng.uniform()
        acc = 0.0
        for i, w in enumerate(weights):
            acc += max(w, 0.0)
            if u < acc:
                return support[i]
        return support[-1]

    def phase3_margin(self, budgets, t: int) -> tuple[float, list[float]]:
        """Current (gamma, mix) of the control phase, for inspection."""
        support = self._support
        tau = self.c * math.log(max(self.horizon - t - 1, 1))
        rows = self._constraint_rows(budgets, tau)
        if not rows:
            return 1.0, [1.0 / len(support)] * len(support)
        value, weights = maximize_min_linear(rows)
        return min(max(8.0 * value, 0.0), 1.0), weights

    # -- learning ------------------------------------------------------------

    def observe(self, arm: int, reward: float, drifts) -> None:
        self.table.update(arm, reward, drifts)
        if self.phase != 1:
            return
        if not self._identification_ready():
            return
        if self.variant == "ucb":
            values = ucb_lp_values(self.table, self.horizon, self.budget)
        else:
            values = empirical_lp_values(self.table, self.horizon, self.budget)
        identify_structure(
            values,
            self.identified_arms,
            self.identified_resources,
            capacity=self.num_resources + 1,
        )
        if len(self.identified_arms) + len(self.identified_resources) >= self.num_resources + 1:
            self._finish_phase1(at_round=self._pending_round)

    def _identification_ready(self) -> bool:
        if self.variant == "ucb":
            return True
        counts = self.table.counts
        need = self.phase1_min_pulls
        return all(counts[x] >= need for x in range(1, self.num_arms))


# ---------------------------------------------------------------------------
# Baselines and the policy factory
# ---------------------------------------------------------------------------


class LpSamplerPolicy:
    """Sample the optimal static mix i.i.d.; idle when forced."""

    __slots__ = ("_cum", "_point")

    def __init__(self, sol: LpSolution):
        p = np.maximum(sol.probabilities, 0.0)
        cum = np.cumsum(p)
        cum[-1] = max(cum[-1], 1.0)
        self._cum = cum.tolist()
        self._point = None
        for x, v in enumerate(sol.probabilities):
            if v > 1.0 - 1e-12:
                self._point = x

    def select(self, t: int, budgets, rng: PolicyRng) -> int:
        for b in budgets:
            if b < 1.0:
                return 0
        if self._point is not None:
            return self._point
        u = rng.uniform()
        for x, edge in enumerate(self._cum):
            if u < edge:
                return x
        return len(self._cum) - 1

    def observe(self, arm: int, reward: float, drifts) -> None:
        pass


class NullOnlyPolicy:
    __slots__ = ()

    def select(self, t: int, budgets, rng: PolicyRng) -> int:
        return 0

    def observe(self, arm: int, reward: float, drifts) -> None:
        pass


def practical_threshold_coefficient(gamma_star: float, horizon: int) -> float:
    """min(theory constant, T / (10 ln T)): usable at desk scale, recorded."""
    return min(default_threshold_coefficient(gamma_star), horizon / (10.0 * math.log(horizon)))


def make_policy(
    policy_id: str,
    env: Environment,
    c: float | None = None,
    gamma_star: float | None = None,
    phase1_min_pulls: int | None = None,
):
    """Build a fresh policy instance for one episode on ``env``."""
    if policy_id not in POLICY_IDS:
        raise InvalidInstance(f"unknown policy {policy_id!r}; known: {', '.join(POLICY_IDS)}")
    if policy_id == "null-only":
        return NullOnlyPolicy()
    instance = env.instance()
    sol = solve_relaxation(instance)
    if policy_id == "lp-sampler":
        return LpSamplerPolicy(sol)
    if policy_id in ("cb1", "cb"):
        constants = compute_constants(instance, sol, strict=False)
        coef = c if c is not None else practical_threshold_coefficient(
            constants.gamma_star, env.horizon
        )
        if policy_id == "cb1":
            cfg1 = cb1_classify(sol, instance, coef)
            return CbOnePolicy(cfg1, env.horizon)
        cfg = cb_config(instance, sol, coef, constants.gamma_star)
        return CbPolicy(cfg, env.horizon, env.num_resources)
    # learning policies: only structural knowledge of the instance is used
    constants = compute_constants(instance, sol, strict=False)
    gstar = gamma_star if gamma_star is not None else constants.gamma_star
    coef = c if c is not None else practical_threshold_coefficient(gstar, env.horizon)
    return EtcbPolicy(
        num_arms=env.num_arms,
        num_resources=env.num_resources,
        horizon=env.horizon,
        budget=env.budget,
        gamma_star=gstar,
        c=coef,
        variant="empirical" if policy_id == "etcb-empirical" else "ucb",
        phase1_min_pulls=(
            phase1_min_pulls if phase1_min_pulls is not None else DEFAULT_PHASE1_MIN_PULLS
        ),
    )
