"""Stochastic environment: arm outcome distributions and budget dynamics.

Each arm owns a finite joint distribution over (reward, drift vector).  A
round samples the chosen arm's distribution, adds the drift to every resource
budget, and pays the reward.  Whenever some budget sits below 1 only arm 0
(the idle arm) may be pulled; its nonnegative drift then lifts the budgets
back, so budgets never go negative.

Randomness contract: every episode is keyed by (master_seed, seed).  That key
is expanded with ``numpy.random.SeedSequence`` into one stream per arm plus
one stream reserved for policy-internal randomization, so two policies run on
the same key see identical outcomes on the i-th pull of each arm.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .exceptions import IllegalArm, InvalidInstance, UnknownFixture
from .lp import LpInstance

_PROB_TOL = 1e-12
_SAMPLE_BLOCK = 1024


class OutcomeDistribution:
    """Finite distribution over (reward, drifts) outcomes.

    ``atoms`` is a sequence of (probability, reward, drifts) with rewards in
    [0, 1] and each drift coordinate in [-1, 1]; probabilities must sum to 1.
    """

    __slots__ = ("atoms", "_mean")

    def __init__(self, atoms):
        atoms = [(float(p), float(r), tuple(float(v) for v in d)) for p, r, d in atoms]
        if not atoms:
            raise InvalidInstance("distribution needs at least one atom")
        total = sum(p for p, _, _ in atoms)
        if abs(total - 1.0) > _PROB_TOL:
            raise InvalidInstance(f"atom probabilities sum to {total!r}, not 1")
        m = len(atoms[0][2])
        for p, r, d in atoms:
            if p < 0:
                raise InvalidInstance("atom probabilities must be nonnegative")
            if not 0.0 <= r <= 1.0:
                raise InvalidInstance(f"reward {r} outside [0, 1]")
            if len(d) != m:
                raise InvalidInstance("inconsistent drift dimension across atoms")
            if any(abs(v) > 1.0 for v in d):
                raise InvalidInstance(f"drift {d} outside [-1, 1]^m")
        self.atoms = tuple(atoms)
        mean_r = sum(p * r for p, r, _ in atoms)
        mean_d = tuple(sum(p * d[j] for p, _, d in atoms) for j in range(m))
        self._mean = (mean_r, mean_d)

    @property
    def num_resources(self) -> int:
        return len(self.atoms[0][2])

    def mean(self) -> tuple[float, tuple[float, ...]]:
        return self._mean


def bernoulli_reward(mean: float) -> list[tuple[float, float]]:
    """Support/probability pairs for a {0,1} reward with the given mean."""
    if not 0.0 <= mean <= 1.0:
        raise InvalidInstance(f"reward mean {mean} outside [0, 1]")
    if mean == 0.0:
        return [(0.0, 1.0)]
    if mean == 1.0:
        return [(1.0, 1.0)]
    return [(1.0, mean), (0.0, 1.0 - mean)]


def bernoulli_drift(mean: float) -> list[tuple[float, float]]:
    """Signed Bernoulli drift: support {0, +1} for positive means, {0, -1}
    for negative means."""
    if abs(mean) > 1.0:
        raise InvalidInstance(f"drift mean {mean} outside [-1, 1]")
    if mean == 0.0:
        return [(0.0, 1.0)]
    if mean > 0:
        if mean == 1.0:
            return [(1.0, 1.0)]
        return [(1.0, mean), (0.0, 1.0 - mean)]
    if mean == -1.0:
        return [(-1.0, 1.0)]
    return [(-1.0, -mean), (0.0, 1.0 + mean)]


def product_distribution(reward_dist, drift_dists) -> OutcomeDistribution:
    """Joint distribution with independent reward and drift coordinates.

    Each argument is a list of (value, probability) pairs.
    """
    atoms = [(p, r, ()) for r, p in reward_dist]
    for dist in drift_dists:
        atoms = [
            (p * pd, r, d + (v,))
            for p, r, d in atoms
            for v, pd in dist
        ]
    atoms = [(p, r, d) for p, r, d in atoms if p > 0.0]
    return OutcomeDistribution(atoms)


@dataclass(frozen=True)
class BudgetState:
    """Round counter (completed rounds) and current per-resource budgets."""

    t: int
    budgets: tuple[float, ...]


@dataclass(frozen=True)
class StepRecord:
    t: int
    arm: int
    reward: float
    drifts: tuple[float, ...]
    budgets_after: tuple[float, ...]


class Environment:
    """Immutable collection of arms plus horizon and initial budget."""

    def __init__(self, horizon: int, budget: float, arms: list[OutcomeDistribution]):
        if not arms:
            raise InvalidInstance("environment needs at least the idle arm")
        m = arms[0].num_resources
        for dist in arms:
            if dist.num_resources != m:
                raise InvalidInstance("arms disagree on the number of resources")
        null = arms[0]
        for p, r, d in null.atoms:
            if r != 0.0:
                raise InvalidInstance("arm 0 must have zero reward almost surely")
            if any(v < 0.0 for v in d):
                raise InvalidInstance("arm 0 must have nonnegative drift almost surely")
        _, null_mean_drift = null.mean()
        if any(v <= 0.0 for v in null_mean_drift):
            raise InvalidInstance("arm 0 must have strictly positive expected drift")
        self.horizon = int(horizon)
        self.budget = float(budget)
        self.arms = tuple(arms)
        self.num_arms = len(arms)
        self.num_resources = m
        # instance validation (budget range etc.) happens here too
        self._instance = LpInstance(
            horizon=self.horizon,
            budget=self.budget,
            rewards=np.array([dist.mean()[0] for dist in arms]),
            drifts=np.array([[dist.mean()[1][j] for dist in arms] for j in range(m)]),
        )

    def instance(self) -> LpInstance:
        return self._instance

    def initial_state(self) -> BudgetState:
        return BudgetState(t=0, budgets=(self.budget,) * self.num_resources)

    def with_horizon(self, horizon: int) -> "Environment":
        return Environment(horizon, self.budget, list(self.arms))

    def allowed_arms(self, state: BudgetState) -> set[int]:
        """{0} when any budget is below 1, otherwise every arm."""
        if any(b < 1.0 for b in state.budgets):
            return {0}
        return set(range(self.num_arms))

    def sampler(self, master_seed: int, seed: int) -> "EpisodeSampler":
        return EpisodeSampler(self, master_seed, seed)

    def step(
        self, state: BudgetState, arm: int, sampler: "EpisodeSampler"
    ) -> tuple[StepRecord, BudgetState]:
        """Sample one round. The chosen arm must be currently allowed."""
        if state.t >= self.horizon:
            raise IllegalArm(f"round {state.t} is past the horizon {self.horizon}")
        if arm not in self.allowed_arms(state):
            raise IllegalArm(f"arm {arm} not allowed at budgets {state.budgets}")
        reward, drifts = sampler.draw(arm)
        budgets = tuple(b + d for b, d in zip(state.budgets, drifts))
        if any(b < -1e-12 for b in budgets):
            raise InvalidInstance(f"negative budget {budgets} after arm {arm}")
        record = StepRecord(
            t=state.t + 1, arm=arm, reward=reward, drifts=drifts, budgets_after=budgets
        )
        return record, BudgetState(t=state.t + 1, budgets=budgets)

    # -- serialization -----------------------------------------------------

    @classmethod
    def from_json_dict(cls, data: dict) -> "Environment":
        try:
            horizon = int(data["T"])
            budget = float(data["B"])
            arm_specs = data["arms"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInstance(f"malformed instance JSON: {exc}") from exc
        arms = []
        for spec in arm_specs:
            reward = _dist_pairs(spec["reward"])
            drifts = [_dist_pairs(d) for d in spec["drifts"]]
            arms.append(product_distribution(reward, drifts))
        return cls(horizon, budget, arms)

    @classmethod
    def from_json_file(cls, path) -> "Environment":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def _dist_pairs(spec: dict) -> list[tuple[float, float]]:
    support = spec["support"]
    probs = spec["probs"]
    if len(support) != len(probs):
        raise InvalidInstance("distribution support/probs length mismatch")
    return [(float(v), float(p)) for v, p in zip(support, probs)]


class EpisodeSampler:
    """Per-episode outcome sampler with one buffered stream per arm.

    Deterministic arms (a single atom) consume no randomness.  The policy
    stream (spawn child 0) is exposed via :meth:`policy_rng` /
    :meth:`policy_uniforms`.
    """

    __slots__ = ("_atoms", "_cums", "_gens", "_bufs", "_pos", "_single", "_policy_gen")

    def __init__(self, env: Environment, master_seed: int, seed: int):
        root = np.random.SeedSequence((int(master_seed), int(seed)))
        children = root.spawn(env.num_arms + 1)
        self._policy_gen = np.random.Generator(np.random.PCG64(children[0]))
        self._gens = [np.random.Generator(np.random.PCG64(c)) for c in children[1:]]
        self._atoms = []
        self._cums = []
        self._single = []
        for dist in env.arms:
            outcomes = [(r, d) for _, r, d in dist.atoms]
            self._atoms.append(outcomes)
            cums = np.cumsum([p for p, _, _ in dist.atoms])
            cums[-1] = 1.0 + 1e-15  # guard the closed upper edge
            self._cums.append(cums)
            self._single.append(outcomes[0] if len(outcomes) == 1 else None)
        self._bufs = [[] for _ in range(env.num_arms)]
        self._pos = [0] * len(self._bufs)

    def draw(self, arm: int) -> tuple[float, tuple[float, ...]]:
        single = self._single[arm]
        if single is not None:
            return single
        pos = self._pos[arm]
        buf = self._bufs[arm]
        if pos >= len(buf):
            u = self._gens[arm].random(_SAMPLE_BLOCK)
            buf = np.searchsorted(self._cums[arm], u, side="right").tolist()
            self._bufs[arm] = buf
            pos = 0
        self._pos[arm] = pos + 1
        return self._atoms[arm][buf[pos]]

    def policy_rng(self) -> "PolicyRng":
        return PolicyRng(self._policy_gen)


class PolicyRng:
    """Buffered uniform stream for policy-internal sampling."""

    __slots__ = ("_gen", "_buf", "_pos")

    def __init__(self, gen: np.random.Generator):
        self._gen = gen
        self._buf: list[float] = []
        self._pos = 0

    def uniform(self) -> float:
        pos = self._pos
        buf = self._buf
        if pos >= len(buf):
            buf = self._gen.random(_SAMPLE_BLOCK).tolist()
            self._buf = buf
            pos = 0
        self._pos = pos + 1
        return buf[pos]


# ---------------------------------------------------------------------------
# Named fixtures
# ---------------------------------------------------------------------------


def _bernoulli_env(horizon, budget, arm_means) -> Environment:
    """Arms from (reward_mean, drift_means...) tuples, all coordinates
    independent signed Bernoullis."""
    arms = []
    for reward_mean, *drift_means in arm_means:
        arms.append(
            product_distribution(
                bernoulli_reward(reward_mean),
                [bernoulli_drift(d) for d in drift_means],
            )
        )
    return Environment(horizon, budget, arms)


def _fixture_zero_drift() -> Environment:
    null = product_distribution(bernoulli_reward(0.0), [bernoulli_drift(0.5)])
    # deterministic unit reward; drift is a fair +/-1 coin (zero mean, unit
    # second moment)
    walker = OutcomeDistribution([(0.5, 1.0, (1.0,)), (0.5, 1.0, (-1.0,))])
    return Environment(25_000, 1.0, [null, walker])


_FIXTURES = {
    "FIX-A": lambda: _bernoulli_env(25_000, 0.0, [(0.0, 0.1), (0.8, 0.4)]),
    "FIX-B": lambda: _bernoulli_env(25_000, 400.0, [(0.0, 0.4), (0.8, -0.3)]),
    "FIX-C": lambda: _bernoulli_env(25_000, 400.0, [(0.0, 0.4), (0.8, -0.3), (0.1, 0.3)]),
    "FIX-D": lambda: _bernoulli_env(
        25_000, 3.0, [(0.0, 0.1, 0.08), (0.8, -0.2, -0.25), (0.1, 0.4, 0.5)]
    ),
    "FIX-E": lambda: _bernoulli_env(150_000, 10.0, [(0.0, 0.9), (0.8, -0.6), (0.1, 0.7)]),
    "FIX-Z": _fixture_zero_drift,
}

FIXTURE_NAMES = tuple(sorted(_FIXTURES))


def is_fixture(name: str) -> bool:
    return name.upper() in _FIXTURES


def make_fixture(name: str) -> Environment:
    """Build one of the named desk-scale environments (FIX-A .. FIX-E, FIX-Z)."""
    try:
        builder = _FIXTURES[name.upper()]
    except KeyError:
        raise UnknownFixture(
            f"unknown fixture {name!r}; known: {', '.join(FIXTURE_NAMES)}"
        ) from None
    return builder()


def resolve_environment(source: str) -> Environment:
    """Resolve an instance source: fixture ids first, then file paths.

    A leading ``--`` forces file interpretation.
    """
    if source.startswith("--"):
        return Environment.from_json_file(source[2:])
    if is_fixture(source):
        return make_fixture(source)
    return Environment.from_json_file(source)
