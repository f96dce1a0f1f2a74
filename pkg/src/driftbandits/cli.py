"""Command-line front door.

The CLI is a thin client of the HTTP service: every command serializes a
request, sends it to the service, and formats the response.  By default it
talks to an in-process copy of the app (no server needed); pass ``--server
http://host:port`` to target a running instance instead.

Instance sources resolve fixture ids first, then file paths; prefix a path
with ``--`` to skip fixture lookup.  All randomness derives from
``--master-seed`` combined with the per-episode seed list.
"""

from __future__ import annotations

import argparse
import json
import sys

from .environment import is_fixture
from .harness import default_jobs

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PARTIAL = 2


def parse_int_list(text: str) -> list[int]:
    """Parse ``"0..9"``, ``"1,2,5"``, or a mix like ``"0..3,7"``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def make_client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient

    from .service.app import create_app

    return TestClient(create_app())


def _source_payload(source: str) -> dict:
    """Fixture ids travel by name; file paths are inlined so remote servers
    never need to read the client's filesystem."""
    if source.startswith("--"):
        path = source[2:]
    elif is_fixture(source):
        return {"fixture": source.upper()}
    else:
        path = source
    with open(path, "r", encoding="utf-8") as fh:
        return {"instance": json.load(fh)}


def _fail(response) -> int:
    try:
        body = response.json()
    except ValueError:
        body = {"detail": response.text}
    error = body.get("error", "error")
    detail = body.get("detail", body)
    print(f"{error}: {detail}", file=sys.stderr)
    return EXIT_VALIDATION


def _params(args) -> dict:
    return {
        "c": args.c,
        "gamma_star": args.gamma_star,
        "phase1_min_pulls": args.phase1_min_pulls,
    }


def cmd_solve_lp(args, client) -> int:
    payload = _source_payload(args.source)
    payload["include_constants"] = True
    if args.horizon:
        payload["horizon"] = args.horizon
    resp = client.post("/lp/solve", json=payload)
    if resp.status_code != 200:
        return _fail(resp)
    body = resp.json()
    if args.json:
        print(json.dumps(body, indent=2))
    else:
        print(f"value          {body['value']:.12g}")
        print(f"probabilities  {[round(p, 9) for p in body['probabilities']]}")
        print(f"support        {body['support']}")
        print(f"binding        {body['binding']}")
        print(f"degenerate     {body['degenerate']}")
        if body["gap"] is not None:
            print(f"gap            {body['gap']:.12g}")
        con = body.get("constants")
        if con:
            for key in ("delta_drift", "sigma_min", "delta_support", "delta_slack", "gamma_star", "c"):
                print(f"{key:<14} {con[key]}")
    if body.get("assumption_violations"):
        names = ", ".join(body["assumption_violations"])
        print(f"AssumptionViolated: {names}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_constants(args, client) -> int:
    return cmd_solve_lp(args, client)


def _print_aggregates(body) -> None:
    for agg in body["aggregates"]:
        if agg["seed"] != "mean":
            continue
        print(
            f"T={agg['T']:<8} mean regret {agg['regret']:.4f}  "
            f"mean reward {agg['total_reward']:.4f}  null pulls {agg['null_pulls']:.1f}"
        )


def _run_sweep(args, client, horizons: list[int] | None) -> int:
    payload = _source_payload(args.fixture or args.instance)
    payload.update(
        policy=args.policy,
        horizons=horizons or None,
        seeds=parse_int_list(args.seeds),
        master_seed=args.master_seed,
        params=_params(args),
        jobs=args.jobs,
    )
    resp = client.post("/sweeps", json=payload)
    if resp.status_code != 200:
        return _fail(resp)
    body = resp.json()
    if args.json:
        body_no_csv = {k: v for k, v in body.items() if k != "csv"}
        print(json.dumps(body_no_csv, indent=2))
    else:
        _print_aggregates(body)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(body["csv"])
    print(f"wrote {args.out}")
    if body["failures"]:
        for failure in body["failures"]:
            print(f"failed: {failure}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_run(args, client) -> int:
    horizons = parse_int_list(args.horizons) if args.horizons else None
    if horizons and len(horizons) > 1:
        print("run takes a single horizon; use sweep for several", file=sys.stderr)
        return EXIT_VALIDATION
    if not (args.fixture or args.instance) or not args.policy:
        print("run needs an instance source and --policy", file=sys.stderr)
        return EXIT_VALIDATION
    return _run_sweep(args, client, horizons)


def cmd_sweep(args, client) -> int:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
        for key, value in cfg.items():
            key = key.replace("-", "_")
            if key in ("horizons", "seeds") and isinstance(value, str):
                value = parse_int_list(value)
            setattr(args, key, value)
    if isinstance(args.seeds, list):
        args.seeds = ",".join(str(s) for s in args.seeds)
    if not (args.fixture or args.instance) or not args.policy or not args.horizons:
        print("sweep needs an instance source, --policy, and --horizons", file=sys.stderr)
        return EXIT_VALIDATION
    horizons = args.horizons if isinstance(args.horizons, list) else parse_int_list(args.horizons)
    return _run_sweep(args, client, horizons)


def cmd_reduce(args, client) -> int:
    with open(args.instance, "r", encoding="utf-8") as fh:
        instance = json.load(fh)
    payload = {
        "instance": instance,
        "policy": args.policy,
        "seeds": parse_int_list(args.seeds),
        "master_seed": args.master_seed,
        "params": _params(args),
    }
    resp = client.post("/reductions", json=payload)
    if resp.status_code != 200:
        return _fail(resp)
    body = resp.json()
    print(
        f"lp equivalence: bwk {body['value_bwk']:.12g} vs lifted {body['value_lifted']:.12g} "
        f"({'ok' if body['lp_equivalent'] else 'MISMATCH'})"
    )
    if args.json:
        print(json.dumps({k: v for k, v in body.items() if k != "csv"}, indent=2))
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(body["csv"])
    print(f"wrote {args.out}")
    return EXIT_OK if body["lp_equivalent"] else EXIT_PARTIAL


def cmd_report(args, client) -> int:
    points: dict[float, float] = {}
    with open(args.csv, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        try:
            t_col = header.index("T")
            seed_col = header.index("seed")
            regret_col = header.index("regret")
        except ValueError:
            print("not a sweep CSV (missing T/seed/regret columns)", file=sys.stderr)
            return EXIT_VALIDATION
        for line in fh:
            cells = line.rstrip("\n").split(",")
            if cells[seed_col] == "mean":
                points[float(cells[t_col])] = float(cells[regret_col])
    if not points:
        print("no aggregate rows found", file=sys.stderr)
        return EXIT_VALIDATION
    for t in sorted(points):
        print(f"T={int(t):<8} mean regret {points[t]:.4f}")
    if args.fit:
        resp = client.post(
            "/fits",
            json={"points": sorted(points.items()), "model": args.fit},
        )
        if resp.status_code != 200:
            return _fail(resp)
        fit = resp.json()
        line = f"{fit['model']} fit: coefficient {fit['coefficient']:.4g}, rss {fit['rss']:.4g}"
        if fit["exponent"] is not None:
            line += f", exponent {fit['exponent']:.4g}"
        if fit["ci"] is not None:
            line += f", 95% ci [{fit['ci'][0]:.4g}, {fit['ci'][1]:.4g}]"
        print(line)
    return EXIT_OK


def _add_source_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--fixture", help="fixture id (FIX-A .. FIX-E, FIX-Z)")
    parser.add_argument("--instance", help="instance JSON file")


def _add_policy_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--policy",
        choices=["cb1", "cb", "etcb", "etcb-empirical", "lp-sampler", "null-only"],
    )
    parser.add_argument("--seeds", default="0", help="e.g. 0..9 or 0,2,5")
    parser.add_argument("--master-seed", type=int, default=0)
    parser.add_argument("--c", type=float, default=None, help="threshold coefficient")
    parser.add_argument("--gamma-star", type=float, default=None, help="drift-margin override")
    parser.add_argument("--phase1-min-pulls", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=default_jobs())
    parser.add_argument("--out", default="results.csv", help="CSV output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftbandits",
        description="Budget-drift bandit simulations: solve relaxations, run "
        "policies, sweep horizons, embed knapsack instances.",
    )
    parser.add_argument("--server", help="service URL (default: in-process)")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-lp", help="solve the static relaxation of an instance")
    p.add_argument("source", help="fixture id or instance JSON path")
    p.add_argument("--horizon", type=int, default=None)
    p.set_defaults(func=cmd_solve_lp)

    p = sub.add_parser("constants", help="print separation constants of an instance")
    p.add_argument("source")
    p.add_argument("--horizon", type=int, default=None)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("run", help="run one horizon of episodes, write a CSV")
    _add_source_args(p)
    _add_policy_args(p)
    p.add_argument("--horizons", help="single horizon (defaults to the instance's)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a horizons x seeds grid, write a CSV")
    _add_source_args(p)
    _add_policy_args(p)
    p.add_argument("--horizons", help="e.g. 6250,12500,25000")
    p.add_argument("--config", help="run-config JSON file (overrides flags)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reduce", help="embed a knapsack instance and run a policy")
    p.add_argument("--instance", required=True, help="knapsack JSON file")
    _add_policy_args(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("report", help="summarize a sweep CSV, optionally fit a scaling law")
    p.add_argument("--csv", required=True)
    p.add_argument("--fit", choices=["constant", "logT", "sqrtT"])
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "fixture", None) is None and getattr(args, "instance", None) is None:
        if args.command in ("run", "sweep"):
            pass  # validated inside the command (config files may supply it)
    client = make_client(args.server)
    try:
        return args.func(args, client)
    except FileNotFoundError as exc:
        print(f"file not found: {exc.filename}", file=sys.stderr)
        return EXIT_VALIDATION
    except json.JSONDecodeError as exc:
        print(f"malformed JSON: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    finally:
        client.close()


if __name__ == "__main__":
    sys.exit(main())
