"""Command-line entry point: ``vbqc <subcommand> ...``.

Every subcommand prints JSON records, one per line, to stdout (or to
``--out``). Exit status is 0 on success, 1 on a reported failure and 2 on a
usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from dataclasses import replace

from . import bounds as bd
from .graph import bipartite_colouring, greedy_colouring, validate_colouring
from .library import resolve_pattern
from .pattern import PatternError, validate_pattern


def _emit(records, out: str | None) -> None:
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _common(sp: argparse.ArgumentParser, trials: int = 100) -> None:
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=trials)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out", default=None)


def _experiment_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON experiment config; flags given explicitly override it")
    sp.add_argument("--pattern", default=None, help="built-in name or pattern file")
    sp.add_argument("--colouring", choices=("greedy", "bipartite"), default=None)
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--t", type=int)
    sp.add_argument("--w", type=int)
    sp.add_argument("--omega", type=float)
    sp.add_argument("--delta-ratio", type=float)
    sp.add_argument("--behaviour", default=None, help='JSON preset, e.g. \'{"kind": "depolarizing", "p": 0.05}\'')
    sp.add_argument("--engine", choices=("quantum", "classical"), default=None)
    sp.add_argument("--input", default=None, help="input bits, e.g. 01")
    sp.add_argument("--redo-rate", type=float, default=None, help="forced Server redo probability per run")


def _config(args):
    from .harness import ExperimentConfig

    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    upd = {}
    for name in ("pattern", "colouring", "engine"):
        if getattr(args, name, None) is not None:
            upd[name] = getattr(args, name)
    params = {k: getattr(args, k) for k in ("n", "d", "t", "w", "omega") if getattr(args, k, None) is not None}
    if getattr(args, "delta_ratio", None) is not None:
        params["delta_ratio"] = args.delta_ratio
    if params:
        upd["params"] = params
    if args.behaviour:
        upd["behaviour"] = json.loads(args.behaviour)
    if args.input:
        upd["input"] = tuple(int(ch) for ch in args.input)
    if getattr(args, "redo_rate", None) is not None:
        upd["redo"] = {"server_rate": args.redo_rate}
    upd.update(seed=args.seed, jobs=args.jobs)
    if args.trials is not None:
        upd["trials"] = args.trials
    return replace(cfg, **upd)


# --- subcommands -------------------------------------------------------------------


def cmd_run(args) -> int:
    from .harness import monte_carlo, write_records

    cfg = replace(_config(args), out=None)
    summary, records = monte_carlo(cfg, keep_records=True)
    if args.out:
        write_records(args.out, records, summary)
    else:
        _emit([summary.to_dict()], None)
    return 0


def cmd_blindness(args) -> int:
    from .harness import blindness_test

    cfg = _config(args)
    report = blindness_test(cfg, samples=args.samples)
    _emit([{**report.to_dict(), "passed": report.passed()}], args.out)
    return 0 if report.passed() else 1


def cmd_robustness(args) -> int:
    from .harness import robustness_sweep

    cfg = _config(args)
    rows = robustness_sweep(args.noise, args.omegas, cfg, estimate_trials=args.estimate_trials)
    _emit(rows, args.out)
    return 0


def cmd_attack(args) -> int:
    from .harness import sigma_m_sweep

    cfg = _config(args)
    p = cfg.resolve_pattern()
    c = cfg.resolve_colouring(p)
    params = cfg.resolve_params(c.k)
    ms = args.m if args.m else None
    targets = args.target if args.target else None
    try:
        omega = cfg.nominal_omega(params)
        ob = bd.optimize_verifiability_bound(params.n, params.d, params.t, params.k, omega).value
    except bd.InfeasibleError:
        ob = None
    cells = sigma_m_sweep(p, c, params, cfg.trials, cfg.seed, ms, targets)
    _emit([{**cell.to_dict(), "params": params.to_dict(), "bound": ob} for cell in cells], args.out)
    return 0


def cmd_bounds(args) -> int:
    if args.action == "eval":
        bp = bd.BoundParams(args.n, args.d, args.n - args.d, args.k, args.eps1, args.eps2, args.phi)
        rec = {
            "inputs": {"n": bp.n, "d": bp.d, "t": bp.t, "k": bp.k, "eps1": bp.eps1, "eps2": bp.eps2, "phi": bp.phi},
            "omega": bp.omega,
            "value": bd.verifiability_bound(bp),
            "log_value": bd.log_verifiability_bound(bp),
        }
    elif args.action == "optimize":
        d = args.d if args.d is not None else bd.split_runs(args.n, args.delta_ratio)[0]
        ob = bd.optimize_verifiability_bound(args.n, d, args.n - d, args.k, args.omega)
        rec = {"inputs": {"n": args.n, "d": d, "t": args.n - d, "k": args.k, "omega": args.omega}, **ob.to_dict()}
    else:
        plan = bd.min_n_for_target(args.target, args.delta_ratio, args.omega, args.k)
        rec = {
            "inputs": {"target": args.target, "delta_ratio": args.delta_ratio, "omega": args.omega, "k": args.k},
            **plan.to_dict(),
        }
    _emit([rec], args.out)
    return 0


def cmd_colour(args) -> int:
    p = resolve_pattern(args.pattern)
    c = greedy_colouring(p.graph, p.order) if args.mode == "greedy" else bipartite_colouring(p.graph, p.order)
    if c is None:
        _emit([{"pattern": args.pattern, "mode": args.mode, "bipartite": False}], args.out)
        return 1
    rec = {
        "pattern": args.pattern,
        "mode": args.mode,
        "k": c.k,
        "classes": [list(cls) for cls in c.classes()],
        "max_degree": p.graph.max_degree,
        "valid": validate_colouring(p.graph, c),
    }
    _emit([rec], args.out)
    return 0


def cmd_validate(args) -> int:
    try:
        p = resolve_pattern(args.pattern)
    except (PatternError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    problems = validate_pattern(p)
    _emit([{"pattern": args.pattern, "valid": not problems, "problems": problems}], args.out)
    return 0 if not problems else 1


def cmd_serve(args) -> int:
    from .harness import make_behaviour
    from .transport import ProtocolServer, make_session_factory

    behaviour = make_behaviour(json.loads(args.behaviour) if args.behaviour else None)
    factory = make_session_factory(behaviour, args.redo_rate, args.drop_on_redo)
    with ProtocolServer((args.host, args.port), factory) as srv:
        host, port = srv.server_address[:2]
        print(json.dumps({"listening": f"{host}:{port}"}), flush=True)
        try:
            srv.serve_forever()
        except KeyboardInterrupt:
            pass
    return 0


def cmd_connect(args) -> int:
    from .protocol import Accept
    from .transport import StreamSocketTransport, run_protocol_remote

    cfg = _config(args)
    p = cfg.resolve_pattern()
    c = cfg.resolve_colouring(p)
    params = cfg.resolve_params(c.k)
    x = cfg.resolve_input(p)
    address = (args.host, args.port)
    verdict, trace, reconnects = run_protocol_remote(
        lambda: StreamSocketTransport(address), p, c, params, x, cfg.seed
    )
    rec = trace.to_record()
    rec["reconnects"] = reconnects
    _emit([rec], args.out)
    return 0 if isinstance(verdict, Accept) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vbqc", description="Verifiable blind quantum computation simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="Monte Carlo protocol executions")
    _common(sp)
    _experiment_flags(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("blindness", help="uniformity and distinguisher tests on transcripts")
    _common(sp)
    _experiment_flags(sp)
    sp.add_argument("--samples", type=int, default=10_000)
    sp.set_defaults(func=cmd_blindness)

    sp = sub.add_parser("robustness", help="accept rates against the noise-robustness bounds")
    _common(sp)
    _experiment_flags(sp)
    sp.add_argument("--noise", type=float, nargs="+", default=[0.0, 0.02, 0.04])
    sp.add_argument("--omegas", type=float, nargs="+", default=[0.05, 0.2])
    sp.add_argument("--estimate-trials", type=int, default=1000)
    sp.set_defaults(func=cmd_robustness)

    sp = sub.add_parser("attack", help="sigma_m sweep over m and target vertex (classical fast path)")
    _common(sp, trials=10_000)
    _experiment_flags(sp)
    sp.add_argument("--m", type=int, nargs="*", help="attack lengths (default: 0..n)")
    sp.add_argument("--target", type=int, nargs="*", help="target vertices (default: all)")
    sp.set_defaults(func=cmd_attack)

    sp = sub.add_parser("bounds", help="evaluate, optimise or plan with the verifiability bound")
    bsub = sp.add_subparsers(dest="action", required=True)
    be = bsub.add_parser("eval")
    be.add_argument("--n", type=int, required=True)
    be.add_argument("--d", type=int, required=True)
    be.add_argument("--k", type=int, required=True)
    be.add_argument("--eps1", type=float, required=True)
    be.add_argument("--eps2", type=float, required=True)
    be.add_argument("--phi", type=float, required=True)
    bo = bsub.add_parser("optimize")
    bo.add_argument("--n", type=int, default=100)
    bo.add_argument("--d", type=int)
    bo.add_argument("--delta-ratio", type=float, default=0.5)
    bo.add_argument("--k", type=int, required=True)
    bo.add_argument("--omega", type=float, required=True)
    bp = bsub.add_parser("plan")
    bp.add_argument("--target", type=float, required=True)
    bp.add_argument("--delta-ratio", type=float, default=0.5)
    bp.add_argument("--k", type=int, required=True)
    bp.add_argument("--omega", type=float, required=True)
    for p in (be, bo, bp):
        p.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("colour", help="colour a pattern's graph")
    sp.add_argument("pattern")
    sp.add_argument("--mode", choices=("greedy", "bipartite"), default="greedy")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_colour)

    sp = sub.add_parser("validate", help="check a pattern file")
    sp.add_argument("pattern")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("serve", help="run a Server endpoint")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=7700)
    sp.add_argument("--behaviour", default=None)
    sp.add_argument("--redo-rate", type=float, default=0.0)
    sp.add_argument("--drop-on-redo", action="store_true")
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("connect", help="run one protocol execution against a Server endpoint")
    _common(sp, trials=1)
    _experiment_flags(sp)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=7700)
    sp.set_defaults(func=cmd_connect)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except bd.InfeasibleError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
