"""FastAPI service wrapping the simulation core.

Long-running work (sweeps) runs synchronously inside the request; the service
is meant for a single lab box where callers either use the bundled CLI (which
talks to an in-process copy of this app by default) or a remote instance.
Run standalone with ``uvicorn driftbandits.service.app:app``.
"""

from __future__ import annotations

import math

from fastapi import FastAPI

from .. import harness
from ..environment import FIXTURE_NAMES, Environment, make_fixture
from ..exceptions import DriftBanditsError
from ..lp import compute_constants, compute_gap, solve_relaxation
from ..policies import POLICY_IDS, make_policy
from ..reduction import BwkInstance, check_lp_equivalence, lift, run_reduction
from . import schemas

LP_EQUIVALENCE_TOL = 1e-9


def _resolve_env(req: schemas.InstanceSource, horizon: int | None = None) -> Environment:
    if req.fixture is not None:
        env = make_fixture(req.fixture)
    else:
        env = Environment.from_json_dict(req.instance.model_dump())
    if horizon is not None:
        env = env.with_horizon(horizon)
    return env


def _finite_or_none(value: float | None) -> float | None:
    if value is None or not math.isfinite(value):
        return None
    return value


def _episode_model(summary: harness.EpisodeSummary) -> schemas.EpisodeModel:
    return schemas.EpisodeModel(
        T=summary.horizon,
        seed=summary.seed,
        policy=summary.policy,
        total_reward=summary.total_reward,
        opt_lp=summary.opt_lp,
        regret=summary.regret,
        null_pulls=summary.null_pulls,
        leftover_budgets=list(summary.leftover_budgets),
        phase1_end=summary.phase1_end,
        phase2_end=summary.phase2_end,
        phase3_infeasible=summary.phase3_infeasible,
    )


def _aggregate_model(agg: dict) -> schemas.EpisodeModel:
    return schemas.EpisodeModel(
        T=agg["T"],
        seed=agg["seed"],
        policy=agg["policy"],
        total_reward=agg["total_reward"],
        opt_lp=agg["opt_lp"],
        regret=agg["regret"],
        null_pulls=agg["null_pulls"],
        leftover_budgets=list(agg["leftover_budgets"]),
        phase1_end=agg["phase1_end"],
        phase2_end=agg["phase2_end"],
        phase3_infeasible=agg["phase3_infeasible"],
    )


def create_app() -> FastAPI:
    app = FastAPI(title="driftbandits", version="0.1.0")

    @app.exception_handler(DriftBanditsError)
    async def _domain_error(request, exc: DriftBanditsError):
        from fastapi.responses import JSONResponse

        return JSONResponse(
            status_code=422,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/fixtures", response_model=schemas.FixturesResponse)
    def fixtures() -> schemas.FixturesResponse:
        return schemas.FixturesResponse(fixtures=list(FIXTURE_NAMES), policies=list(POLICY_IDS))

    @app.post("/lp/solve", response_model=schemas.SolveResponse)
    def lp_solve(req: schemas.SolveRequest) -> schemas.SolveResponse:
        env = _resolve_env(req, req.horizon)
        instance = env.instance()
        sol = solve_relaxation(instance)
        violations: list[str] = []
        constants = None
        gap = None
        if req.include_constants:
            raw = compute_constants(instance, sol, c=req.c, strict=False)
            for name in ("delta_drift", "sigma_min", "delta_support", "delta_slack", "gamma_star", "gap"):
                value = getattr(raw, name)
                if math.isfinite(value) and value <= 0:
                    violations.append(name)
            constants = schemas.ConstantsModel(
                delta_drift=raw.delta_drift,
                sigma_min=raw.sigma_min,
                delta_support=raw.delta_support,
                delta_slack=_finite_or_none(raw.delta_slack),
                gamma_star=raw.gamma_star,
                gap=_finite_or_none(raw.gap),
                c=raw.c if math.isfinite(raw.c) else -1.0,
            )
            gap = _finite_or_none(raw.gap)
        else:
            gap = _finite_or_none(compute_gap(instance, sol))
        return schemas.SolveResponse(
            value=sol.value,
            probabilities=[float(p) for p in sol.probabilities],
            support=list(sol.support),
            binding=list(sol.binding),
            degenerate=sol.degenerate,
            gap=gap,
            constants=constants,
            assumption_violations=violations,
        )

    @app.post("/episodes", response_model=schemas.EpisodeModel)
    def episodes(req: schemas.EpisodeRequest) -> schemas.EpisodeModel:
        env = _resolve_env(req, req.horizon)
        policy = make_policy(
            req.policy,
            env,
            c=req.params.c,
            gamma_star=req.params.gamma_star,
            phase1_min_pulls=req.params.phase1_min_pulls,
        )
        summary = harness.run_episode(
            env, policy, req.seed, master_seed=req.master_seed, policy_name=req.policy
        )
        return _episode_model(summary)

    @app.post("/sweeps", response_model=schemas.SweepResponse)
    def sweeps(req: schemas.SweepRequest) -> schemas.SweepResponse:
        source = req.fixture if req.fixture is not None else req.instance.model_dump()
        config = harness.RunConfig(
            instance=source,
            policy=req.policy,
            horizons=req.horizons,
            seeds=req.seeds,
            master_seed=req.master_seed,
            c=req.params.c,
            gamma_star=req.params.gamma_star,
            phase1_min_pulls=req.params.phase1_min_pulls,
            jobs=req.jobs,
            config_id=req.config_id,
        )
        result = harness.sweep(config)
        return schemas.SweepResponse(
            config_id=config.config_id,
            episodes=[_episode_model(e) for e in result.episodes],
            aggregates=[_aggregate_model(a) for a in result.aggregates()],
            failures=[f"T={t}: {msg}" for t, msg in result.failures],
            csv=harness.csv_text(result),
        )

    @app.post("/reductions", response_model=schemas.ReduceResponse)
    def reductions(req: schemas.ReduceRequest) -> schemas.ReduceResponse:
        bwk = BwkInstance.from_json_dict(req.instance.model_dump())
        value_bwk, value_lifted = check_lp_equivalence(bwk)
        env = lift(bwk)
        episodes = []
        csv_summaries = []
        for seed in req.seeds:
            policy = make_policy(
                req.policy,
                env,
                c=req.params.c,
                gamma_star=req.params.gamma_star,
                phase1_min_pulls=req.params.phase1_min_pulls,
            )
            run = run_reduction(bwk, policy, seed, master_seed=req.master_seed)
            episodes.append(
                schemas.ReduceEpisodeModel(
                    seed=seed,
                    total_reward=run.total_reward,
                    pulls=run.pulls,
                    idle_recommendations=run.idle_recommendations,
                    budget_actual=list(run.state.budget_actual),
                    budget_sim=list(run.state.budget_sim),
                    stop_triggered=run.state.stop_triggered,
                )
            )
            csv_summaries.append(
                harness.EpisodeSummary(
                    horizon=bwk.horizon,
                    seed=seed,
                    policy=req.policy,
                    total_reward=run.total_reward,
                    opt_lp=value_bwk,
                    regret=bwk.horizon * value_bwk - run.total_reward,
                    null_pulls=run.idle_recommendations,
                    leftover_budgets=run.state.budget_actual,
                    phase1_end=getattr(policy, "phase1_end", None),
                    phase2_end=getattr(policy, "phase2_end", None),
                    phase3_infeasible=getattr(policy, "phase3_infeasible", None),
                )
            )
        config = harness.RunConfig(
            instance="bwk",
            policy=req.policy,
            horizons=[bwk.horizon],
            seeds=list(req.seeds),
            master_seed=req.master_seed,
            config_id=req.config_id,
        )
        result = harness.SweepResult(config=config, episodes=csv_summaries)
        return schemas.ReduceResponse(
            value_bwk=value_bwk,
            value_lifted=value_lifted,
            lp_equivalent=abs(value_bwk - value_lifted) <= LP_EQUIVALENCE_TOL,
            episodes=episodes,
            csv=harness.csv_text(result),
        )

    @app.post("/fits", response_model=schemas.FitResponse)
    def fits(req: schemas.FitRequest) -> schemas.FitResponse:
        fit = harness.fit_scaling(req.points, req.model, fixed_exponent=req.fixed_exponent)
        return schemas.FitResponse(
            model=fit.model,
            coefficient=fit.coefficient,
            exponent=fit.exponent,
            ci=fit.ci,
            rss=fit.rss,
            intercept=fit.intercept,
        )

    return app


app = create_app()
