"""Episode runner, multi-seed sweeps, regret scaling fits, and CSV output.

Regret is reported per episode as ``T * opt_lp - total_reward`` (realized,
possibly negative); expectations are estimated by the seed mean with a
standard error.  Sweeps are deterministic for a fixed seed list: results are
merged in (T, seed) order regardless of execution order.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .environment import Environment, StepRecord, resolve_environment
from .exceptions import DegenerateFit, IllegalArm, InvalidInstance, SweepError
from .lp import solve_relaxation
from .policies import EtcbPolicy, make_policy

MAX_HORIZON = 10_000_000

CSV_BASE_COLUMNS = (
    "config_id",
    "policy",
    "T",
    "seed",
    "total_reward",
    "opt_lp",
    "regret",
    "null_pulls",
)
CSV_TAIL_COLUMNS = ("phase1_end", "phase2_end", "phase3_infeasible")


@dataclass(frozen=True)
class EpisodeSummary:
    horizon: int
    seed: int
    policy: str
    total_reward: float
    opt_lp: float
    regret: float
    null_pulls: int
    leftover_budgets: tuple[float, ...]
    phase1_end: int | None = None
    phase2_end: int | None = None
    phase3_infeasible: int | None = None


@dataclass
class RunConfig:
    """One sweep: an instance source, a policy, horizons x seeds.

    ``instance`` is a fixture id, a JSON file path, or an inline instance
    dict (the same schema the JSON files use).
    """

    instance: str | dict
    policy: str
    horizons: list[int]
    seeds: list[int]
    master_seed: int = 0
    c: float | None = None
    gamma_star: float | None = None
    phase1_min_pulls: int | None = None
    jobs: int = 1
    out: str | None = None
    config_id: str | None = None

    def __post_init__(self):
        if not self.horizons:
            raise SweepError("need at least one horizon")
        if any(t < 1 or t > MAX_HORIZON for t in self.horizons):
            raise SweepError(f"horizons must lie in [1, {MAX_HORIZON}]")
        if not self.seeds:
            raise SweepError("need at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise SweepError("seeds must be distinct")
        if self.config_id is None:
            payload = json.dumps(
                [
                    self.instance,
                    self.policy,
                    self.horizons,
                    self.seeds,
                    self.master_seed,
                    self.c,
                    self.gamma_star,
                    self.phase1_min_pulls,
                ],
                sort_keys=True,
            )
            self.config_id = hashlib.sha256(payload.encode()).hexdigest()[:10]

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise SweepError(f"unknown run-config fields: {sorted(unknown)}")
        return cls(**data)


def run_episode(
    env: Environment,
    policy,
    seed: int,
    master_seed: int = 0,
    policy_name: str = "",
    record_stride: int = 0,
) -> EpisodeSummary | tuple[EpisodeSummary, list[StepRecord]]:
    """Play one full episode and summarize it.

    ``record_stride=n`` additionally returns every n-th step record (1 keeps
    all of them).
    """
    horizon = env.horizon
    m = env.num_resources
    opt = solve_relaxation(env.instance()).value
    sampler = env.sampler(master_seed, seed)
    rng = sampler.policy_rng()
    budgets = [env.budget] * m
    total = 0.0
    nulls = 0
    select = policy.select
    observe = policy.observe
    draw = sampler.draw
    trajectory: list[StepRecord] = []
    for t in range(horizon):
        arm = select(t, budgets, rng)
        if arm != 0:
            for b in budgets:
                if b < 1.0:
                    raise IllegalArm(f"arm {arm} chosen at budgets {budgets}")
        else:
            nulls += 1
        reward, drifts = draw(arm)
        for j in range(m):
            nb = budgets[j] + drifts[j]
            if nb < 0.0:
                raise InvalidInstance(f"budgets {budgets} went negative under {drifts}")
            budgets[j] = nb
        total += reward
        observe(arm, reward, drifts)
        if record_stride and (t + 1) % record_stride == 0:
            trajectory.append(
                StepRecord(t + 1, arm, reward, drifts, tuple(budgets))
            )
    summary = EpisodeSummary(
        horizon=horizon,
        seed=seed,
        policy=policy_name or type(policy).__name__,
        total_reward=total,
        opt_lp=opt,
        regret=horizon * opt - total,
        null_pulls=nulls,
        leftover_budgets=tuple(budgets),
        phase1_end=getattr(policy, "phase1_end", None),
        phase2_end=getattr(policy, "phase2_end", None),
        phase3_infeasible=(
            policy.phase3_infeasible if isinstance(policy, EtcbPolicy) else None
        ),
    )
    if record_stride:
        return summary, trajectory
    return summary


def _resolve_instance(source: str | dict) -> Environment:
    if isinstance(source, dict):
        return Environment.from_json_dict(source)
    return resolve_environment(source)


def _run_cell(args) -> dict:
    cfg_dict, horizon, seeds = args
    cfg = RunConfig.from_dict(cfg_dict)
    env = _resolve_instance(cfg.instance).with_horizon(horizon)
    results = []
    for seed in seeds:
        policy = make_policy(
            cfg.policy,
            env,
            c=cfg.c,
            gamma_star=cfg.gamma_star,
            phase1_min_pulls=cfg.phase1_min_pulls,
        )
        summary = run_episode(
            env, policy, seed, master_seed=cfg.master_seed, policy_name=cfg.policy
        )
        results.append(summary)
    return {"horizon": horizon, "summaries": results}


@dataclass
class SweepResult:
    config: RunConfig
    episodes: list[EpisodeSummary]
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def aggregates(self) -> list[dict]:
        rows = []
        for horizon in self.config.horizons:
            eps = [e for e in self.episodes if e.horizon == horizon]
            if not eps:
                continue
            rows.append(_aggregate(self.config, horizon, eps, "mean"))
            rows.append(_aggregate(self.config, horizon, eps, "stderr"))
        return rows


def _mean(values) -> float | None:
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def _stderr(values) -> float | None:
    values = [v for v in values if v is not None]
    n = len(values)
    if n < 2:
        return 0.0 if n == 1 else None
    mu = sum(values) / n
    var = sum((v - mu) ** 2 for v in values) / (n - 1)
    return math.sqrt(var / n)


def _aggregate(config: RunConfig, horizon: int, eps, kind: str) -> dict:
    agg = _mean if kind == "mean" else _stderr
    m = len(eps[0].leftover_budgets)
    return {
        "config_id": config.config_id,
        "policy": config.policy,
        "T": horizon,
        "seed": kind,
        "total_reward": agg([e.total_reward for e in eps]),
        "opt_lp": agg([e.opt_lp for e in eps]),
        "regret": agg([e.regret for e in eps]),
        "null_pulls": agg([e.null_pulls for e in eps]),
        "leftover_budgets": tuple(
            agg([e.leftover_budgets[j] for e in eps]) for j in range(m)
        ),
        "phase1_end": agg([e.phase1_end for e in eps]),
        "phase2_end": agg([e.phase2_end for e in eps]),
        "phase3_infeasible": agg([e.phase3_infeasible for e in eps]),
    }


def sweep(config: RunConfig) -> SweepResult:
    """Run the full horizons x seeds grid.

    Episodes are independent; with ``jobs > 1`` they run in worker processes
    and are merged by (T, seed) so the result is order-deterministic either
    way.  Individual cell failures are collected, not raised.
    """
    cfg_dict = {k: getattr(config, k) for k in config.__dataclass_fields__}
    chunk = max(1, len(config.seeds) // 8) if config.jobs > 1 else len(config.seeds)
    tasks = []
    for horizon in config.horizons:
        for i in range(0, len(config.seeds), chunk):
            tasks.append((cfg_dict, horizon, config.seeds[i : i + chunk]))
    outputs = []
    failures: list[tuple[int, str]] = []
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            futures = [pool.submit(_run_cell, task) for task in tasks]
            for task, fut in zip(tasks, futures):
                try:
                    outputs.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - cell isolation
                    failures.append((task[1], f"{type(exc).__name__}: {exc}"))
    else:
        for task in tasks:
            try:
                outputs.append(_run_cell(task))
            except Exception as exc:  # noqa: BLE001 - cell isolation
                failures.append((task[1], f"{type(exc).__name__}: {exc}"))
    episodes = [s for out in outputs for s in out["summaries"]]
    episodes.sort(key=lambda e: (e.horizon, e.seed))
    return SweepResult(config=config, episodes=episodes, failures=failures)


# ---------------------------------------------------------------------------
# Scaling-law fits
# ---------------------------------------------------------------------------

FIT_MODELS = ("constant", "logT", "sqrtT")

_T_CRITICAL_95 = {1: 12.706, 2: 4.303, 3: 3.182, 4: 2.776, 5: 2.571, 6: 2.447, 7: 2.365, 8: 2.306}


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of mean regret against the horizon.

    ``constant``: regret = a.  ``logT``: regret = a + coefficient * ln T.
    ``sqrtT``: power law ln(regret) = ln a + exponent * ln T (exponent can be
    pinned, e.g. to 0.5).  ``rss`` is the linear-space residual sum of
    squares, comparable across models.
    """

    model: str
    coefficient: float
    exponent: float | None
    ci: tuple[float, float] | None
    rss: float
    intercept: float
    shift: float = 0.0

    def predict(self, horizon: float) -> float:
        if self.model == "constant":
            return self.coefficient
        if self.model == "logT":
            return self.intercept + self.coefficient * math.log(horizon)
        return self.coefficient * horizon**self.exponent - self.shift


def fit_scaling(points, model: str, fixed_exponent: float | None = None) -> ScalingFit:
    """Fit one scaling model to (horizon, mean regret) points (>= 4 required)."""
    if model not in FIT_MODELS:
        raise DegenerateFit(f"unknown model {model!r}; known: {FIT_MODELS}")
    points = sorted((float(t), float(r)) for t, r in points)
    n = len(points)
    if n < 4:
        raise DegenerateFit(f"need at least 4 horizons, got {n}")
    ts = [p[0] for p in points]
    rs = [p[1] for p in points]
    if model == "constant":
        mu = sum(rs) / n
        rss = sum((r - mu) ** 2 for r in rs)
        slope, se = _ols_slope([math.log(t) for t in ts], rs)
        crit = _T_CRITICAL_95.get(n - 2, 1.96)
        ci = (slope - crit * se, slope + crit * se)  # slope-vs-zero check
        return ScalingFit("constant", mu, None, ci, rss, mu)
    if model == "logT":
        xs = [math.log(t) for t in ts]
        slope, intercept, se = _ols(xs, rs)
        crit = _T_CRITICAL_95.get(n - 2, 1.96)
        preds = [intercept + slope * x for x in xs]
        rss = sum((r - p) ** 2 for r, p in zip(rs, preds))
        return ScalingFit("logT", slope, None, (slope - crit * se, slope + crit * se), rss, intercept)
    # power law on (ln T, ln regret); nonpositive regrets are shifted by +1
    shift = 0.0
    if min(rs) <= 0.0:
        shift = 1.0
        if min(rs) + shift <= 0.0:
            raise DegenerateFit(f"regret {min(rs)} too negative for the log transform")
    xs = [math.log(t) for t in ts]
    ys = [math.log(r + shift) for r in rs]
    if fixed_exponent is not None:
        exponent = fixed_exponent
        log_a = sum(y - exponent * x for x, y in zip(xs, ys)) / n
        ci = None
    else:
        exponent, log_a, se = _ols(xs, ys)
        crit = _T_CRITICAL_95.get(n - 2, 1.96)
        ci = (exponent - crit * se, exponent + crit * se)
    a = math.exp(log_a)
    preds = [a * t**exponent - shift for t in ts]
    rss = sum((r - p) ** 2 for r, p in zip(rs, preds))
    return ScalingFit("sqrtT", a, exponent, ci, rss, log_a, shift)


def _ols(xs, ys) -> tuple[float, float, float]:
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = my - slope * mx
    resid = sum((y - intercept - slope * x) ** 2 for x, y in zip(xs, ys))
    dof = max(n - 2, 1)
    se = math.sqrt(resid / dof / sxx)
    return slope, intercept, se


def _ols_slope(xs, ys) -> tuple[float, float]:
    slope, _, se = _ols(xs, ys)
    return slope, se


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        if value != value:  # nan
            return ""
        return f"{value:.12g}"
    return str(value)


def csv_text(result: SweepResult) -> str:
    """Render episodes plus mean/stderr aggregate rows per the fixed schema."""
    if result.episodes:
        m = len(result.episodes[0].leftover_budgets)
    else:
        m = 1
    header = (
        list(CSV_BASE_COLUMNS)
        + [f"leftover_budget_{j}" for j in range(m)]
        + list(CSV_TAIL_COLUMNS)
    )
    lines = [",".join(header)]
    config = result.config
    for e in result.episodes:
        row = [
            config.config_id,
            config.policy,
            _fmt(e.horizon),
            _fmt(e.seed),
            _fmt(e.total_reward),
            _fmt(e.opt_lp),
            _fmt(e.regret),
            _fmt(e.null_pulls),
        ]
        row += [_fmt(b) for b in e.leftover_budgets]
        row += [_fmt(e.phase1_end), _fmt(e.phase2_end), _fmt(e.phase3_infeasible)]
        lines.append(",".join(row))
    for agg in result.aggregates():
        row = [
            agg["config_id"],
            agg["policy"],
            _fmt(agg["T"]),
            agg["seed"],
            _fmt(agg["total_reward"]),
            _fmt(agg["opt_lp"]),
            _fmt(agg["regret"]),
            _fmt(agg["null_pulls"]),
        ]
        row += [_fmt(b) for b in agg["leftover_budgets"]]
        row += [_fmt(agg["phase1_end"]), _fmt(agg["phase2_end"]), _fmt(agg["phase3_infeasible"])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_csv(result: SweepResult, path: str) -> None:
    """Write (truncating) the sweep CSV: UTF-8, LF endings, header row."""
    text = csv_text(result)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path!r}: {exc}") from exc


def default_jobs() -> int:
    return os.cpu_count() or 1
