"""Static relaxation machinery for the drift-budget bandit model.

The per-round relaxation is the linear program

    maximize    sum_x p_x * reward[x]
    subject to  sum_x p_x * drift[j][x] >= -B/T   for every resource j
                sum_x p_x = 1,  p >= 0

whose value, scaled by the horizon, upper-bounds the total expected reward of
any play sequence.  This module solves that program and its two restricted
variants (one arm forced out; one resource's slack penalized in the
objective), extracts the support/binding structure, and derives the
separation constants the control policies need.

Instances are tiny (a handful of arms and resources), so everything is dense
and exact-ish: a primal simplex with Bland's rule for determinism, a
brute-force vertex enumerator as an independent test oracle, and a cyclic
Jacobi eigensolver for the smallest singular value of the basis matrix.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    AssumptionViolated,
    InfeasibleInstance,
    InvalidInstance,
    OracleScaleExceeded,
    UnboundedProgram,
)

# Feasibility / binding detection and support membership thresholds.
FEAS_TOL = 1e-8
SUPPORT_TOL = 1e-8
PIVOT_TOL = 1e-10

NEG_INF = float("-inf")


# ---------------------------------------------------------------------------
# Instance
# ---------------------------------------------------------------------------


@dataclass
class LpInstance:
    """Expected-value description of a problem instance.

    ``rewards`` has one entry per arm in [0, 1]; ``drifts`` is an
    (m x k) matrix with entries in [-1, 1].  Arm 0 is the idle arm: zero
    reward and strictly positive expected drift on every resource (the
    positivity check can be relaxed for confidence-bound surrogates via
    ``strict_null=False``).
    """

    horizon: int
    budget: float
    rewards: np.ndarray
    drifts: np.ndarray
    strict_null: bool = True

    def __post_init__(self):
        self.rewards = np.asarray(self.rewards, dtype=float)
        self.drifts = np.asarray(self.drifts, dtype=float)
        if self.drifts.ndim != 2 or self.rewards.ndim != 1:
            raise InvalidInstance("rewards must be a vector and drifts a matrix")
        m, k = self.drifts.shape
        if k != self.rewards.shape[0]:
            raise InvalidInstance(
                f"drift matrix has {k} arm columns but {self.rewards.shape[0]} rewards"
            )
        if k < 1 or m < 1:
            raise InvalidInstance("need at least one arm and one resource")
        if self.horizon < 1:
            raise InvalidInstance(f"horizon must be positive, got {self.horizon}")
        if not 0.0 <= self.budget <= self.horizon:
            raise InvalidInstance(
                f"initial budget must lie in [0, T], got {self.budget} with T={self.horizon}"
            )
        if np.any(self.rewards < -FEAS_TOL) or np.any(self.rewards > 1 + FEAS_TOL):
            raise InvalidInstance("rewards must lie in [0, 1]")
        if np.any(np.abs(self.drifts) > 1 + FEAS_TOL):
            raise InvalidInstance("drifts must lie in [-1, 1]")
        if abs(self.rewards[0]) > FEAS_TOL:
            raise InvalidInstance("arm 0 must have zero expected reward")
        if self.strict_null and np.any(self.drifts[:, 0] <= 0):
            raise InvalidInstance("arm 0 must have strictly positive expected drift")

    @property
    def num_arms(self) -> int:
        return self.drifts.shape[1]

    @property
    def num_resources(self) -> int:
        return self.drifts.shape[0]

    @property
    def budget_rate(self) -> float:
        """B/T, the per-round budget allowance."""
        return self.budget / self.horizon

    def with_horizon(self, horizon: int) -> "LpInstance":
        return LpInstance(
            horizon=horizon,
            budget=self.budget,
            rewards=self.rewards.copy(),
            drifts=self.drifts.copy(),
            strict_null=self.strict_null,
        )


# ---------------------------------------------------------------------------
# Dense primal simplex (Bland's rule)
# ---------------------------------------------------------------------------


def solve_lp(
    objective: np.ndarray,
    a_ge: np.ndarray | None = None,
    b_ge: np.ndarray | None = None,
    a_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
) -> tuple[np.ndarray, float, dict]:
    """Maximize ``objective @ x`` over ``a_ge x >= b_ge``, ``a_eq x = b_eq``, ``x >= 0``.

    Dense two-phase primal simplex with Bland's anti-cycling rule, so the
    returned vertex is deterministic for a fixed input.  Returns
    ``(x, value, info)`` where ``info`` carries the reduced costs and a
    degeneracy flag.  Raises :class:`InfeasibleInstance` or
    :class:`UnboundedProgram`.
    """
    c = np.asarray(objective, dtype=float)
    n = c.shape[0]
    rows = []
    rhs = []
    n_ge = 0
    if a_ge is not None:
        a_ge = np.atleast_2d(np.asarray(a_ge, dtype=float))
        b_ge = np.atleast_1d(np.asarray(b_ge, dtype=float))
        n_ge = a_ge.shape[0]
    n_eq = 0
    if a_eq is not None:
        a_eq = np.atleast_2d(np.asarray(a_eq, dtype=float))
        b_eq = np.atleast_1d(np.asarray(b_eq, dtype=float))
        n_eq = a_eq.shape[0]

    m = n_ge + n_eq
    total = n + n_ge  # structural + surplus
    a = np.zeros((m, total))
    b = np.zeros(m)
    if n_ge:
        a[:n_ge, :n] = a_ge
        a[:n_ge, n : n + n_ge] = -np.eye(n_ge)
        b[:n_ge] = b_ge
    if n_eq:
        a[n_ge:, :n] = a_eq
        b[n_ge:] = b_eq

    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0

    # Phase 1: artificial basis, minimize artificial mass.
    tab = np.zeros((m, total + m + 1))
    tab[:, :total] = a
    tab[:, total : total + m] = np.eye(m)
    tab[:, -1] = b
    basis = list(range(total, total + m))
    _run_simplex(tab, basis, _phase1_costs(total, m), bland_limit=total + m)
    art_mass = sum(tab[i, -1] for i, v in enumerate(basis) if v >= total)
    if art_mass > 1e-9:
        raise InfeasibleInstance(f"phase-1 residual {art_mass:.3e}")

    # Drive surviving artificials out of the basis or drop redundant rows.
    keep = []
    for i in range(m):
        if basis[i] < total:
            keep.append(i)
            continue
        pivot_col = next(
            (j for j in range(total) if abs(tab[i, j]) > PIVOT_TOL), None
        )
        if pivot_col is None:
            continue  # redundant row
        _pivot(tab, i, pivot_col)
        basis[i] = pivot_col
        keep.append(i)
    if len(keep) < m:
        tab = tab[keep]
        basis = [basis[i] for i in keep]
        m = len(keep)

    # Phase 2 on the real objective.
    costs = np.zeros(total + m)
    costs[:n] = c
    reduced = _run_simplex(tab, basis, costs, bland_limit=total)

    x = np.zeros(total)
    for i, v in enumerate(basis):
        if v < total:
            x[v] = tab[i, -1]
    value = float(c @ x[:n])
    degenerate = _detect_degeneracy(tab, basis, reduced, total, n)
    info = {"reduced_costs": reduced[:total], "degenerate": degenerate, "basis": list(basis)}
    return x[:n], value, info


def _phase1_costs(total: int, m: int) -> np.ndarray:
    costs = np.zeros(total + m)
    costs[total:] = -1.0
    return costs


def _run_simplex(tab: np.ndarray, basis: list[int], costs: np.ndarray, bland_limit: int) -> np.ndarray:
    """Iterate pivots in place until optimal; returns final reduced costs.

    ``bland_limit`` restricts entering candidates to column indices below it
    (used to freeze artificial columns out of phase 2).
    """
    m = tab.shape[0]
    max_iter = 500 * (m + tab.shape[1])
    for _ in range(max_iter):
        cb = costs[basis]
        reduced = costs[: tab.shape[1] - 1] - cb @ tab[:, :-1]
        entering = -1
        for j in range(bland_limit):
            if reduced[j] > 1e-9:
                entering = j
                break
        if entering < 0:
            return reduced
        ratios = []
        for i in range(m):
            aij = tab[i, entering]
            if aij > PIVOT_TOL:
                ratios.append((tab[i, -1] / aij, basis[i], i))
        if not ratios:
            raise UnboundedProgram(f"column {entering} unbounded")
        ratios.sort(key=lambda t: (t[0], t[1]))
        leaving_row = ratios[0][2]
        _pivot(tab, leaving_row, entering)
        basis[leaving_row] = entering
    raise UnboundedProgram("simplex iteration limit hit")  # pragma: no cover


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    for i in range(tab.shape[0]):
        if i != row and abs(tab[i, col]) > 0:
            tab[i] -= tab[i, col] * tab[row]


def _detect_degeneracy(tab, basis, reduced, total, n) -> bool:
    basic = set(basis)
    for j in range(total):
        if j not in basic and abs(reduced[j]) <= 1e-8:
            return True  # alternative optimal basis
    for i, v in enumerate(basis):
        if v < n and tab[i, -1] <= 1e-8:
            return True  # structural variable basic at zero
    return False


# ---------------------------------------------------------------------------
# Relaxation and restricted variants
# ---------------------------------------------------------------------------


@dataclass
class LpSolution:
    """Optimum of the relaxation together with its support structure.

    ``support`` is the set of arms played with positive probability,
    ``binding`` the set of resources whose drift constraint is tight.  The
    restricted basis system (one row per binding resource restricted to the
    support, plus an all-ones row) is exposed through
    :meth:`restricted_system`, which validates the nondegeneracy condition
    ``len(binding) == len(support) - 1``.
    """

    instance: LpInstance
    value: float
    probabilities: np.ndarray
    support: tuple[int, ...]
    binding: tuple[int, ...]
    degenerate: bool = False
    _system: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def restricted_system(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (D, b): binding drift rows restricted to the support, then a
        ones row; rhs is -B/T per binding resource, then 1."""
        if self._system is None:
            n = len(self.support)
            if len(self.binding) != n - 1:
                raise AssumptionViolated(
                    "basis-dimension",
                    value=(len(self.support), len(self.binding)),
                )
            d = np.ones((n, n))
            for i, j in enumerate(self.binding):
                d[i] = self.instance.drifts[j, list(self.support)]
            b = np.full(n, -self.instance.budget_rate)
            b[-1] = 1.0
            self._system = (d, b)
        return self._system

    @property
    def basis_matrix(self) -> np.ndarray:
        return self.restricted_system()[0]

    @property
    def rhs(self) -> np.ndarray:
        return self.restricted_system()[1]

    def drift_at_optimum(self, j: int) -> float:
        """Expected drift of resource j under the optimal mix."""
        return float(self.instance.drifts[j] @ self.probabilities)


def solve_relaxation(instance: LpInstance) -> LpSolution:
    """Solve the relaxation; deterministic support extraction.

    The polytope always contains the point mass on arm 0 when the idle arm
    has nonnegative drift and B >= 0, so infeasibility indicates instance
    corruption and raises.
    """
    k = instance.num_arms
    p, value, info = solve_lp(
        instance.rewards,
        a_ge=instance.drifts,
        b_ge=np.full(instance.num_resources, -instance.budget_rate),
        a_eq=np.ones((1, k)),
        b_eq=np.array([1.0]),
    )
    support = tuple(x for x in range(k) if p[x] > SUPPORT_TOL)
    rate = instance.budget_rate
    binding = tuple(
        j
        for j in range(instance.num_resources)
        if abs(float(instance.drifts[j] @ p) + rate) <= FEAS_TOL
    )
    return LpSolution(
        instance=instance,
        value=value,
        probabilities=p,
        support=support,
        binding=binding,
        degenerate=info["degenerate"],
    )


def solve_minus_arm(instance: LpInstance, x: int) -> float:
    """Optimum with arm ``x`` forced out; -inf when that leaves no feasible mix."""
    k = instance.num_arms
    if not 0 <= x < k:
        raise InvalidInstance(f"arm index {x} out of range for k={k}")
    keep = [i for i in range(k) if i != x]
    if not keep:
        return NEG_INF
    try:
        _, value, _ = solve_lp(
            instance.rewards[keep],
            a_ge=instance.drifts[:, keep],
            b_ge=np.full(instance.num_resources, -instance.budget_rate),
            a_eq=np.ones((1, k - 1)),
            b_eq=np.array([1.0]),
        )
    except InfeasibleInstance:
        return NEG_INF
    return value


def solve_minus_resource(instance: LpInstance, j: int) -> float:
    """Optimum when resource ``j``'s constraint slack is charged to the objective.

    The charge is ``-(sum_x p_x drift[j][x] + B/T)``, i.e. exactly the slack of
    constraint j, so the modified optimum equals the plain optimum precisely
    when j is binding there.
    """
    if not 0 <= j < instance.num_resources:
        raise InvalidInstance(f"resource index {j} out of range")
    objective = instance.rewards - instance.drifts[j]
    _, value, _ = solve_lp(
        objective,
        a_ge=instance.drifts,
        b_ge=np.full(instance.num_resources, -instance.budget_rate),
        a_eq=np.ones((1, instance.num_arms)),
        b_eq=np.array([1.0]),
    )
    return value - instance.budget_rate


def compute_gap(instance: LpInstance, sol: LpSolution) -> float:
    """Minimum value lost by dropping a support arm or penalizing a
    non-binding resource; +inf when both ranges are empty."""
    losses = [sol.value - solve_minus_arm(instance, x) for x in sol.support]
    losses += [
        sol.value - solve_minus_resource(instance, j)
        for j in range(instance.num_resources)
        if j not in sol.binding
    ]
    return min(losses) if losses else math.inf


# ---------------------------------------------------------------------------
# Brute-force vertex oracle
# ---------------------------------------------------------------------------

ORACLE_MAX_ARMS = 8
ORACLE_MAX_RESOURCES = 4


def enumerate_vertex_optimum(instance: LpInstance) -> tuple[float, np.ndarray]:
    """Enumerate every basic feasible point of the relaxation and return the best.

    Test oracle only: independent of the simplex path (direct linear solves
    per candidate active set).
    """
    k = instance.num_arms
    m = instance.num_resources
    if k > ORACLE_MAX_ARMS or m > ORACLE_MAX_RESOURCES:
        raise OracleScaleExceeded(f"oracle supports k<={ORACLE_MAX_ARMS}, m<={ORACLE_MAX_RESOURCES}")
    rate = instance.budget_rate
    best_value = NEG_INF
    best_p: np.ndarray | None = None
    constraints = [("arm", x) for x in range(k)] + [("res", j) for j in range(m)]
    for active in itertools.combinations(constraints, k - 1):
        rows = np.ones((k, k))
        rhs = np.zeros(k)
        rhs[0] = 1.0
        for i, (kind, idx) in enumerate(active, start=1):
            if kind == "arm":
                rows[i] = 0.0
                rows[i, idx] = 1.0
                rhs[i] = 0.0
            else:
                rows[i] = instance.drifts[idx]
                rhs[i] = -rate
        try:
            p = np.linalg.solve(rows, rhs)
        except np.linalg.LinAlgError:
            continue
        if np.any(p < -1e-9):
            continue
        if np.any(instance.drifts @ p < -rate - 1e-9):
            continue
        value = float(instance.rewards @ p)
        if value > best_value + 1e-15:
            best_value = value
            best_p = p
    if best_p is None:  # pragma: no cover - polytope is never empty
        raise InfeasibleInstance("no feasible vertex found")
    return best_value, best_p


# ---------------------------------------------------------------------------
# Smallest singular value (cyclic Jacobi on M^T M)
# ---------------------------------------------------------------------------


def smallest_singular_value(mat: np.ndarray) -> float:
    """Smallest singular value of a small square matrix.

    Eigen-decomposes ``M^T M`` with cyclic Jacobi rotations; relative accuracy
    around 1e-10 on the tiny well-scaled matrices used here.
    """
    m = np.asarray(mat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInstance(f"need a square matrix, got shape {m.shape}")
    a = m.T @ m
    n = a.shape[0]
    if n == 1:
        return math.sqrt(max(a[0, 0], 0.0))
    scale = max(np.max(np.abs(a)), 1e-300)
    for _ in range(100):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-16 * scale:
                    continue
                off = max(off, abs(apq))
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                a[p, q] = a[q, p] = 0.0
        if off <= 1e-14 * scale:
            break
    return math.sqrt(max(float(np.min(np.diag(a))), 0.0))


# ---------------------------------------------------------------------------
# Separation constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeparationConstants:
    """Instance-level margins that govern the control policies.

    ``gamma_star = sigma_min * min(delta_support, delta_slack) / (4m)`` is the
    guaranteed drift margin; ``c`` is the threshold coefficient, defaulting to
    the theoretical ``6 / gamma_star**2``.  ``delta_slack`` is +inf when every
    resource is binding.
    """

    delta_drift: float
    sigma_min: float
    delta_support: float
    delta_slack: float
    gamma_star: float
    gap: float
    c: float


_CONSTANT_ORDER = ("delta_drift", "sigma_min", "delta_support", "delta_slack", "gamma_star", "gap")


def compute_constants(
    instance: LpInstance,
    sol: LpSolution,
    c: float | None = None,
    strict: bool = True,
) -> SeparationConstants:
    """Derive all separation constants from a solved relaxation.

    With ``strict=True`` (default) a nonpositive constant raises
    :class:`AssumptionViolated` naming the offender; ``strict=False`` returns
    the raw values for diagnostics on instances outside the assumptions.
    """
    delta_drift = float(np.min(np.abs(instance.drifts)))
    d, _ = sol.restricted_system()
    sigma_min = smallest_singular_value(d)
    delta_support = float(min(sol.probabilities[x] for x in sol.support))
    nonbinding = [j for j in range(instance.num_resources) if j not in sol.binding]
    delta_slack = min((sol.drift_at_optimum(j) for j in nonbinding), default=math.inf)
    gamma_star = sigma_min * min(delta_support, delta_slack) / (4.0 * instance.num_resources)
    gap = compute_gap(instance, sol)
    constants = SeparationConstants(
        delta_drift=delta_drift,
        sigma_min=sigma_min,
        delta_support=delta_support,
        delta_slack=delta_slack,
        gamma_star=gamma_star,
        gap=gap,
        c=c if c is not None else default_threshold_coefficient(gamma_star),
    )
    if strict:
        for name in _CONSTANT_ORDER:
            value = getattr(constants, name)
            if math.isfinite(value) and value <= 0:
                raise AssumptionViolated(name, value=value)
            if value == NEG_INF:  # gap of -inf cannot occur, guard anyway
                raise AssumptionViolated(name, value=value)
    return constants


def default_threshold_coefficient(gamma_star: float) -> float:
    """Theoretical threshold coefficient 6 / gamma_star^2 (inf-safe)."""
    if gamma_star <= 0:
        return math.inf
    return 6.0 / (gamma_star * gamma_star)
