"""Command-line interface: check, obligations, simulate, monitor-eval."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from importlib import resources

from .dl import Ident, ParseError
from .specfile import load_spec
from .checks import check_spec
from .obligations import gen_obligations, emit_obligation_files
from .actions import (
    ALeft, APair, AReal, ARight, UNIT, ctrl_monitor_trace, make_action,
)
from .runtime import ExperimentConfig, Shield, run_experiment
from .envs import REGISTRY, load_env_config
from .policies import (
    CONTROL_POLICIES, DEFAULT_POLICIES, INFERENCE_POLICIES, UNSHIELDED_CONTROL,
)

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_USAGE = 2


def bundled_spec_path(stem: str) -> str:
    return str(resources.files("adashield").joinpath(f"data/{stem}.shield"))


def _load(path: str):
    if not os.path.exists(path) and not path.endswith(".shield"):
        candidate = bundled_spec_path(path)
        if os.path.exists(candidate):
            path = candidate
    if not os.path.exists(path):
        print(f"error: no such spec file: {path}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    try:
        return load_spec(path)
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def cmd_check(args) -> int:
    spec = _load(args.spec)
    diags = check_spec(spec)
    if args.json:
        print(json.dumps({"spec": spec.name,
                          "diagnostics": [vars(d) for d in diags]}))
    else:
        for d in diags:
            print(d)
        if not diags:
            print(f"{spec.name}: ok "
                  f"({len(spec.bounds)} bounds, {len(spec.infer)} inference assignments)")
    return EXIT_OK if not diags else EXIT_DIAGNOSTICS


def cmd_obligations(args) -> int:
    spec = _load(args.spec)
    diags = check_spec(spec)
    if diags:
        for d in diags:
            print(d, file=sys.stderr)
        return EXIT_DIAGNOSTICS
    obls = gen_obligations(spec, include_invariant_monotone=args.invariant_monotone)
    paths = emit_obligation_files(obls, args.out, spec)
    if args.json:
        print(json.dumps({"spec": spec.name,
                          "obligations": [{"name": o.name, "kind": o.kind} for o in obls],
                          "files": paths}))
    else:
        width = max(len(o.name) for o in obls)
        for o in obls:
            print(f"{o.name:<{width}}  {o.kind}")
        print(f"{len(obls)} obligations written to {os.path.join(args.out, spec.name)}")
    return EXIT_OK


def _resolve_policies(args, env_name: str):
    defaults = DEFAULT_POLICIES.get(env_name, ("greedy-train", "skip"))
    ctrl_name = args.policy_control or defaults[0]
    infer_name = args.policy_infer or defaults[1]
    if args.unshielded and not args.policy_control:
        ctrl_name = UNSHIELDED_CONTROL.get(env_name, ctrl_name)
    if ctrl_name not in CONTROL_POLICIES:
        raise SystemExit(f"unknown control policy {ctrl_name!r}; "
                         f"choose from {sorted(CONTROL_POLICIES)}")
    if infer_name not in INFERENCE_POLICIES:
        raise SystemExit(f"unknown inference policy {infer_name!r}; "
                         f"choose from {sorted(INFERENCE_POLICIES)}")
    return ctrl_name, infer_name


def _worker_chunk(payload):
    """Run a contiguous episode range in a worker process; per-episode seed
    derivation keeps the result independent of the process layout."""
    (env_name, overrides, spec_path, ctrl_name, infer_name, ep_lo, ep_hi,
     budget, mode, seed, max_steps, unshielded, non_adaptive, want_trace) = payload
    factory = REGISTRY[env_name][0]
    spec = load_spec(spec_path)
    env = factory(overrides)
    env.meta_mode = mode == "meta"
    shield = Shield(spec, env.consts)
    control = CONTROL_POLICIES[ctrl_name](shield, env)
    inference = INFERENCE_POLICIES[infer_name](shield, env)
    from .runtime import StepFlags, run_episode
    import numpy as np
    flags = StepFlags(unshielded=unshielded, non_adaptive=non_adaptive)
    episodes, records = [], []
    sink = (lambda rec: records.append(json.dumps(rec.to_json()) + "\n")) \
        if want_trace else None
    for ep in range(ep_lo, ep_hi):
        ss = np.random.SeedSequence(entropy=(seed, ep))
        episodes.append(run_episode(
            shield, env, control, inference, budget,
            max_steps or env.max_steps, ss, episode=ep, flags=flags,
            record_sink=sink))
    return episodes, records


def _run_parallel(args, spec, spec_path, overrides, ctrl_name, infer_name,
                  budget, mode, trace_file):
    import math as _math
    from concurrent.futures import ProcessPoolExecutor
    from .runtime import ExperimentStats
    import numpy as np

    chunk = max(1, _math.ceil(args.episodes / args.workers))
    payloads = [
        (args.env, overrides, spec_path, ctrl_name, infer_name,
         lo, min(lo + chunk, args.episodes), budget, mode, args.seed,
         args.max_steps, args.unshielded, args.non_adaptive, bool(trace_file))
        for lo in range(0, args.episodes, chunk)]
    episodes, all_records = [], []
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        for eps, records in pool.map(_worker_chunk, payloads):
            episodes.extend(eps)
            all_records.extend(records)
    if trace_file:
        trace_file.writelines(all_records)
    rets = [e.ret for e in episodes]
    import math as m
    return ExperimentStats(
        episodes=episodes,
        crashes=sum(1 for e in episodes if e.crash),
        mean_return=float(np.mean(rets)) if rets else 0.0,
        overrides=sum(e.overrides for e in episodes),
        eps_spent=m.fsum(e.eps_spent for e in episodes),
        ledger_error=max((e.ledger_error for e in episodes), default=0.0),
        reuse_violations=sum(e.reuse_violations for e in episodes),
        shield_seconds=sum(e.shield_seconds for e in episodes),
        env_seconds=sum(e.env_seconds for e in episodes),
        steps=sum(e.steps for e in episodes))


def cmd_simulate(args) -> int:
    if args.env not in REGISTRY:
        print(f"error: unknown environment {args.env!r}; "
              f"choose from {sorted(REGISTRY)}", file=sys.stderr)
        return EXIT_USAGE
    factory, spec_stem, default_budget, default_mode = REGISTRY[args.env]
    overrides = load_env_config(args.env_config) if args.env_config else None
    spec_path = args.spec or bundled_spec_path(spec_stem)
    spec = _load(spec_path)
    diags = check_spec(spec)
    if diags:
        for d in diags:
            print(d, file=sys.stderr)
        return EXIT_DIAGNOSTICS

    env0 = factory(overrides)
    shield = Shield(spec, env0.consts)
    ctrl_name, infer_name = _resolve_policies(args, args.env)
    budget = default_budget if args.budget is None else args.budget
    mode = args.mode or default_mode

    os.makedirs(args.out, exist_ok=True)
    sink = None
    trace_file = None
    if args.trace:
        trace_path = os.path.join(args.out, f"{args.env}_seed{args.seed}.jsonl")
        trace_file = open(trace_path, "w", encoding="utf-8")
        sink = lambda rec: trace_file.write(json.dumps(rec.to_json()) + "\n")

    if args.workers > 1 and mode == "fixed":
        print("note: fixed-mode budgets are sequential; running with 1 worker",
              file=sys.stderr)
    cfg = ExperimentConfig(
        spec_name=spec.name,
        env_factory=lambda: factory(overrides),
        control_policy=CONTROL_POLICIES[ctrl_name],
        inference_policy=INFERENCE_POLICIES[infer_name],
        episodes=args.episodes, max_steps=args.max_steps, budget=budget,
        mode=mode, seed=args.seed, unshielded=args.unshielded,
        non_adaptive=args.non_adaptive)
    try:
        if args.workers > 1 and mode == "meta":
            stats = _run_parallel(args, spec, spec_path, overrides, ctrl_name,
                                  infer_name, budget, mode, trace_file)
        else:
            stats = run_experiment(shield, cfg, record_sink=sink)
    finally:
        if trace_file:
            trace_file.close()

    csv_path = os.path.join(args.out, f"{args.env}_seed{args.seed}_summary.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["episode", "return", "steps", "crash", "overrides", "eps_spent"])
        for e in stats.episodes:
            wr.writerow([e.episode, repr(e.ret), e.steps, int(e.crash),
                         e.overrides, repr(e.eps_spent)])

    summary = {
        "env": args.env, "spec": spec.name, "episodes": args.episodes,
        "mode": mode, "budget": budget,
        "control_policy": ctrl_name, "inference_policy": infer_name,
        "unshielded": args.unshielded, "non_adaptive": args.non_adaptive,
        "crashes": stats.crashes, "mean_return": stats.mean_return,
        "overrides": stats.overrides, "eps_spent": stats.eps_spent,
        "override_rate": stats.overrides / max(stats.steps, 1),
        "steps": stats.steps,
        "shield_seconds": stats.shield_seconds,
        "env_seconds": stats.env_seconds,
        "ledger_error": stats.ledger_error,
        "reuse_violations": stats.reuse_violations,
        "summary_csv": csv_path,
    }
    if args.json:
        print(json.dumps(summary))
    else:
        print(f"env={args.env} episodes={args.episodes} mode={mode} budget={budget:g}")
        print(f"crashes={stats.crashes}  mean_return={stats.mean_return:.3f}  "
              f"override_rate={summary['override_rate']:.3f}  "
              f"eps_spent={stats.eps_spent:.3g}")
        print(f"shield time {stats.shield_seconds:.2f}s over {stats.steps} steps "
              f"({1e6 * stats.shield_seconds / max(stats.steps, 1):.0f} us/step); "
              f"summary: {csv_path}")
    return EXIT_OK


def _parse_action_json(doc):
    if doc == "*":
        return UNIT
    if isinstance(doc, (int, float)):
        return AReal(float(doc))
    if isinstance(doc, list) and len(doc) == 2:
        return APair(_parse_action_json(doc[0]), _parse_action_json(doc[1]))
    if isinstance(doc, dict) and "left" in doc:
        return ALeft(_parse_action_json(doc["left"]))
    if isinstance(doc, dict) and "right" in doc:
        return ARight(_parse_action_json(doc["right"]))
    if isinstance(doc, dict) and "directives" in doc:
        return None  # resolved against the controller later
    raise ValueError(f"cannot parse action document: {doc!r}")


def cmd_monitor_eval(args) -> int:
    spec = _load(args.spec)
    with open(args.state, "r", encoding="utf-8") as fh:
        state_doc = json.load(fh)
    with open(args.action, "r", encoding="utf-8") as fh:
        action_doc = json.load(fh)
    val = {}
    for k, v in state_doc.items():
        name, _, idx = k.partition("@")
        val[Ident(name, int(idx) if idx else None)] = float(v)
    try:
        action = _parse_action_json(action_doc)
        if action is None:
            action = make_action(spec.ctrl, action_doc["directives"])
    except (ValueError, IndexError) as e:
        print(f"error: malformed action: {e}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    consts = {}
    if args.consts:
        with open(args.consts, "r", encoding="utf-8") as fh:
            consts = {k: float(v) for k, v in json.load(fh).items()}
    try:
        results, failures = ctrl_monitor_trace(spec.ctrl, val, action, consts)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    verdict = "SAFE" if not failures else "UNSAFE"
    if args.json:
        print(json.dumps({"verdict": verdict,
                          "tests": [{"test": t, "holds": (None if str(r) == "UNDEF" else bool(r))}
                                    for t, r in results]}))
    else:
        print(verdict)
        for i, (t, r) in enumerate(results):
            shown = "undefined" if str(r) == "UNDEF" else str(bool(r)).lower()
            print(f"  test {i}: {shown}  {t}")
    return EXIT_OK if not failures else EXIT_DIAGNOSTICS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="adashield",
        description="Adaptive-shield compiler and simulation runtime")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse a spec and run well-formedness checks")
    p.add_argument("spec", help=".shield file or bundled spec name")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("obligations", help="emit proof obligation files")
    p.add_argument("spec")
    p.add_argument("--out", default="obligations")
    p.add_argument("--invariant-monotone", action="store_true",
                   help="also emit per-parameter invariant monotonicity obligations")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_obligations)

    p = sub.add_parser("simulate", help="run shielded episodes against an environment")
    p.add_argument("--env", required=True, choices=sorted(REGISTRY))
    p.add_argument("--spec", help="override the bundled spec for this environment")
    p.add_argument("--env-config", help="key = value overrides for the environment")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--budget", type=float, default=None)
    p.add_argument("--mode", choices=("fixed", "meta"), default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy-control", default=None)
    p.add_argument("--policy-infer", default=None)
    p.add_argument("--trace", action="store_true", help="write JSONL step records")
    p.add_argument("--workers", type=int, default=1,
                   help="episode-level worker processes (meta mode only)")
    p.add_argument("--out", default="runs")
    p.add_argument("--unshielded", action="store_true",
                   help="bypass the monitor (no overrides)")
    p.add_argument("--non-adaptive", action="store_true",
                   help="deactivate statistical inference (defaults only)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("monitor-eval", help="evaluate the controller monitor on a state/action")
    p.add_argument("--spec", required=True)
    p.add_argument("--state", required=True, help="JSON file: variable -> value")
    p.add_argument("--action", required=True,
                   help='JSON file: action tree or {"directives": [...]}')
    p.add_argument("--consts", help="JSON file: constant symbol -> value")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_monitor_eval)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
