"""Shielded-environment runtime: budgeted inference, monitoring, fallback
override and episode/experiment execution.

A transition runs in the documented order: interpret the inference strategy
under the policy's action, surface referenced historical measurements
(burning their availability so nothing is reused across control cycles),
execute the budgeted symbolic assignments, refresh the bound instantiations,
then monitor the proposed control action and override it with the fallback
when rejected, and finally step the underlying environment.

Measurements are taken eagerly when a history entry is created and cached
privately; the cache is never exposed through any policy-facing surface.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dl import Ident, UNDEF, eval_formula, is_runtime_evaluable
from .dl.syntax import conjuncts
from .specfile import ShieldSpec
from .actions import (
    ControlAction, ctrl_exec, ctrl_monitor, resolve_fallback,
)
from .strategy import (
    BOTTOM, InferenceAction, eval_sbi, interpret_strategy,
    referenced_indices, referenced_observations,
)

TRACE_SCHEMA_VERSION = 1


class InitialConditionViolation(Exception):
    pass


class LocalParamUnset(Exception):
    """A local parameter ended an inference cycle without a value; the static
    default-assignment check should have ruled this out."""


class KahanLedger:
    """Compensated accumulator for spent tolerance."""

    __slots__ = ("initial", "_sum", "_comp")

    def __init__(self, initial: float):
        self.initial = float(initial)
        self._sum = 0.0
        self._comp = 0.0

    def add(self, x: float) -> None:
        y = x - self._comp
        t = self._sum + y
        self._comp = (t - self._sum) - y
        self._sum = t

    @property
    def spent(self) -> float:
        return self._sum

    @property
    def remaining(self) -> float:
        return self.initial - self._sum


@dataclass
class HistoryEntry:
    state_val: dict
    available: set
    local_bounds: dict
    cache: dict = field(default_factory=dict, repr=False)  # private measurements


@dataclass
class ShieldedState:
    env_state: object
    history: list
    global_bounds: dict
    ledger: KahanLedger


@dataclass
class AssignmentRecord:
    param: str
    eps: float
    skipped: bool
    bottom: bool
    updated: bool
    method: Optional[str]


@dataclass
class StepRecord:
    episode: int
    step: int
    proposed: object
    overridden: bool
    executed: object
    bounds_before: dict
    bounds_after: dict
    assignments: list
    consumed: list
    availability: dict
    reward: float
    safe: bool
    terminal: bool

    def to_json(self) -> dict:
        from .actions import AUnit, AReal, APair, ALeft, ARight

        def enc(a):
            t = type(a)
            if t is AUnit:
                return "*"
            if t is AReal:
                return a.value
            if t is APair:
                return [enc(a.left), enc(a.right)]
            if t is ALeft:
                return {"left": enc(a.action)}
            if t is ARight:
                return {"right": enc(a.action)}
            return str(a)

        return {
            "v": TRACE_SCHEMA_VERSION,
            "episode": self.episode,
            "step": self.step,
            "proposed": enc(self.proposed),
            "overridden": self.overridden,
            "executed": enc(self.executed),
            "bounds_before": {str(k): v for k, v in self.bounds_before.items()},
            "bounds_after": {str(k): v for k, v in self.bounds_after.items()},
            "assignments": [vars(a) for a in self.assignments],
            "consumed": self.consumed,
            "availability": self.availability,
            "reward": self.reward,
            "safe": self.safe,
            "terminal": self.terminal,
        }


@dataclass(frozen=True)
class HistoryView:
    index: int
    state: dict
    available: frozenset


@dataclass(frozen=True)
class PolicyView:
    """Policy-facing projection of a shielded state.

    Carries state features, current bound values, step/budget progress and
    per-entry observation availability; never any measurement value.
    """

    state: dict
    bounds: dict
    step: int
    max_steps: int
    budget_remaining: float
    budget_initial: float
    history: tuple
    avail_counts: dict


class Shield:
    """A checked spec compiled against an environment's constants."""

    def __init__(self, spec: ShieldSpec, consts: dict, allow_cantelli: bool = False):
        self.spec = spec
        self.interp = dict(consts)
        self.allow_cantelli = allow_cantelli
        self.directions = spec.directions
        self.local_params = tuple(spec.local_params)
        self.global_params = tuple(spec.global_params)
        self.obs_names = spec.obs_names
        self.noise_decls = spec.noise_decls

    def initial_globals(self, env) -> dict:
        from .dl import eval_term
        if self.spec.initial_global_bounds:
            out = {}
            for p, t in self.spec.initial_global_bounds.items():
                v = eval_term(t, self.interp, {})
                if v is UNDEF:
                    raise InitialConditionViolation(
                        f"initial value for {p} is not a closed constant term")
                out[p] = v
            return out
        env_defaults = env.initial_global_bounds()
        if env_defaults is None and self.global_params:
            raise InitialConditionViolation(
                "no initial global bound instantiation available")
        return dict(env_defaults or {})


def init_shielded_state(shield: Shield, env, budget: float, rng,
                        ledger: Optional[KahanLedger] = None) -> ShieldedState:
    """Reset the environment and verify the initial-state contract against
    ground truth (a simulation-only privilege)."""
    spec = shield.spec
    s0 = env.reset(rng)
    b_g = shield.initial_globals(env)
    missing = [p for p in shield.global_params if p not in b_g]
    if missing:
        raise InitialConditionViolation(
            f"initial global bounds missing for {sorted(map(str, missing))}")

    audit_interp = {**shield.interp, **env.unknowns()}
    val = {**env.state_map(s0), **b_g}
    for name, f in _initial_conjuncts(spec, b_g):
        r = eval_formula(f, audit_interp, val)
        if r is UNDEF or not r:
            raise InitialConditionViolation(f"initial state violates {name}")

    return ShieldedState(s0, [], b_g, ledger or KahanLedger(budget))


def _initial_conjuncts(spec: ShieldSpec, b_g: dict):
    for f in spec.assumptions:
        if is_runtime_evaluable(f):
            yield "an assumption", f
    for p in spec.global_params:
        yield f"the bound for {p}", spec.bound_formulas[p]
    yield "the invariant", spec.invariant


def make_policy_view(shield: Shield, env, st: ShieldedState, step: int,
                     max_steps: int) -> PolicyView:
    bounds = dict(st.global_bounds)
    if st.history:
        bounds.update(st.history[-1].local_bounds)
    counts: dict = {}
    views = []
    for i, e in enumerate(st.history, start=1):
        views.append(HistoryView(i, e.state_val, frozenset(e.available)))
        for name in e.available:
            counts[name] = counts.get(name, 0) + 1
    return PolicyView(
        state=env.state_map(st.env_state),
        bounds=bounds,
        step=step,
        max_steps=max_steps,
        budget_remaining=st.ledger.remaining,
        budget_initial=st.ledger.initial,
        history=tuple(views),
        avail_counts=counts,
    )


@dataclass
class StepFlags:
    unshielded: bool = False
    non_adaptive: bool = False


def shielded_transition(shield: Shield, st: ShieldedState, env,
                        a_ctrl: ControlAction, a_inf: InferenceAction,
                        env_rng, measure_rng, episode: int, step: int,
                        flags: StepFlags = StepFlags()):
    """One transition of the shielded environment.

    Returns ``(new_state, reward, terminal, record, timing)`` where timing is
    ``(shield_seconds, env_seconds)``.
    """
    spec = shield.spec
    interp = shield.interp
    t0 = time.perf_counter()

    if flags.non_adaptive:
        a_inf = tuple(None for _ in a_inf)
    assignments = interpret_strategy(spec.infer, a_inf, shield.directions,
                                     shield.noise_decls)

    history = st.history
    n = len(history) + 1
    sval = env.state_map(st.env_state)
    v: dict = dict(sval)
    for k, x in sval.items():
        v[Ident(k.name, n)] = x
    v.update(st.global_bounds)
    for k, x in st.global_bounds.items():
        v[Ident(k.name, n)] = x

    consumed: list = []
    obs_refs = referenced_observations(assignments, shield.obs_names)
    obs_idx = {}
    for ident in obs_refs:
        obs_idx.setdefault(ident.index, []).append(ident.name)
    for i in sorted(referenced_indices(assignments)):
        if not 1 <= i <= len(history):
            continue
        entry = history[i - 1]
        for k, x in entry.state_val.items():
            v[Ident(k.name, i)] = x
        for k, x in entry.local_bounds.items():
            v[Ident(k.name, i)] = x
        if i in obs_idx:
            for name in sorted(obs_idx[i]):
                if name in entry.available:
                    v[Ident(name, i)] = entry.cache[name]
                    consumed.append((i, name))
            entry.available = set()  # nothing at this step may be reused later

    ledger = st.ledger
    bounds_before = dict(st.global_bounds)
    if history:
        bounds_before.update(history[-1].local_bounds)
    arecs: list[AssignmentRecord] = []
    for sa in assignments:
        if sa.eps > ledger.remaining:
            arecs.append(AssignmentRecord(str(sa.param), sa.eps, True, False, False, None))
            continue
        ledger.add(sa.eps)
        r, meta = eval_sbi(sa.sbi, interp, v, config=shield)
        method = meta["methods"][-1] if meta["methods"] else None
        if r is BOTTOM or not math.isfinite(r):
            arecs.append(AssignmentRecord(str(sa.param), sa.eps, False, True, False, method))
            continue
        cur = v.get(sa.param)
        up = shield.directions.get(sa.param) != "lo"
        tighter = cur is None or (r < cur if up else r > cur)
        if tighter:
            v[sa.param] = r
            v[Ident(sa.param.name, n)] = r
        arecs.append(AssignmentRecord(str(sa.param), sa.eps, False, False, tighter, method))

    b_l = {p: v[p] for p in shield.local_params if p in v}
    if len(b_l) != len(shield.local_params):
        unset = [str(p) for p in shield.local_params if p not in b_l]
        raise LocalParamUnset(f"local parameter(s) {unset} not assigned this cycle")
    b_g = {p: v[p] for p in shield.global_params}

    availability = env.obs_available(st.env_state)
    cache = env.measure(st.env_state, measure_rng)
    history.append(HistoryEntry(sval, set(availability), b_l, cache))

    bounds = {**b_g, **b_l}
    mval = {**sval, **bounds}
    overridden = False
    executed = a_ctrl
    if not flags.unshielded:
        if not ctrl_monitor(spec.ctrl, mval, a_ctrl, interp):
            executed = resolve_fallback(spec.ctrl, spec.fallback, mval, interp)
            overridden = True
    exec_vals = ctrl_exec(spec.ctrl, mval, executed, interp)

    t1 = time.perf_counter()
    s2, reward, terminal = env.step(st.env_state, exec_vals, env_rng)
    t2 = time.perf_counter()
    if not terminal:
        reward += env.shaping(bounds, ledger.remaining)

    record = StepRecord(
        episode=episode, step=step, proposed=a_ctrl, overridden=overridden,
        executed=executed, bounds_before=bounds_before, bounds_after=bounds,
        assignments=arecs, consumed=consumed,
        availability={name: True for name in sorted(availability)},
        reward=reward, safe=env.ground_truth_safe(s2), terminal=terminal)

    new_state = ShieldedState(s2, history, b_g, ledger)
    return new_state, reward, terminal, record, (t1 - t0 + time.perf_counter() - t2, t2 - t1)


@dataclass
class EpisodeStats:
    episode: int
    steps: int
    ret: float
    crash: bool
    overrides: int
    eps_spent: float
    ledger_error: float
    reuse_violations: int
    shield_seconds: float
    env_seconds: float


def run_episode(shield: Shield, env, control_policy, inference_policy,
                budget: float, max_steps: int, seed_seq, episode: int = 0,
                flags: StepFlags = StepFlags(),
                ledger: Optional[KahanLedger] = None,
                record_sink: Optional[Callable] = None) -> EpisodeStats:
    """Run one episode; audits the tolerance ledger and observation reuse on
    the fly."""
    reset_ss, env_ss, meas_ss = seed_seq.spawn(3)
    reset_rng = np.random.default_rng(reset_ss)
    env_rng = np.random.default_rng(env_ss)
    measure_rng = np.random.default_rng(meas_ss)

    st = init_shielded_state(shield, env, budget, reset_rng, ledger=ledger)
    led = st.ledger
    spent_before = led.spent

    total = 0.0
    overrides = 0
    crash = not env.ground_truth_safe(st.env_state)
    spent_records: list[float] = []
    seen_pairs: set = set()
    reuse = 0
    shield_s = env_s = 0.0
    steps = 0

    for step in range(max_steps):
        view = make_policy_view(shield, env, st, step, max_steps)
        a_ctrl = control_policy(view)
        a_inf = inference_policy(view)
        st, reward, terminal, rec, (ts, te) = shielded_transition(
            shield, st, env, a_ctrl, a_inf, env_rng, measure_rng,
            episode, step, flags)
        shield_s += ts
        env_s += te
        total += reward
        steps += 1
        overrides += 1 if rec.overridden else 0
        crash = crash or not rec.safe
        for a in rec.assignments:
            if not a.skipped:
                spent_records.append(a.eps)
        for pair in rec.consumed:
            key = tuple(pair)
            if key in seen_pairs:
                reuse += 1
            seen_pairs.add(key)
        if record_sink is not None:
            record_sink(rec)
        if terminal:
            break

    ledger_error = abs((led.spent - spent_before) - math.fsum(spent_records))
    return EpisodeStats(
        episode=episode, steps=steps, ret=total, crash=crash,
        overrides=overrides, eps_spent=led.spent - spent_before,
        ledger_error=ledger_error, reuse_violations=reuse,
        shield_seconds=shield_s, env_seconds=env_s)


@dataclass
class ExperimentConfig:
    spec_name: str
    env_factory: Callable
    control_policy: Callable  # factory: (shield, env) -> policy
    inference_policy: Callable
    episodes: int = 100
    max_steps: Optional[int] = None
    budget: float = 1e-3
    mode: str = "fixed"  # 'fixed' | 'meta'
    seed: int = 0
    unshielded: bool = False
    non_adaptive: bool = False


@dataclass
class ExperimentStats:
    episodes: list
    crashes: int
    mean_return: float
    overrides: int
    eps_spent: float
    ledger_error: float
    reuse_violations: int
    shield_seconds: float
    env_seconds: float
    steps: int


def run_experiment(shield: Shield, cfg: ExperimentConfig,
                   record_sink: Optional[Callable] = None) -> ExperimentStats:
    """Run an experiment; in fixed mode one budget spans all episodes and
    the environment's unknowns stay fixed, in meta mode both reset."""
    env = cfg.env_factory()
    env.meta_mode = cfg.mode == "meta"
    max_steps = cfg.max_steps or env.max_steps
    control = cfg.control_policy(shield, env)
    inference = cfg.inference_policy(shield, env)
    flags = StepFlags(unshielded=cfg.unshielded, non_adaptive=cfg.non_adaptive)

    shared = KahanLedger(cfg.budget) if cfg.mode == "fixed" else None
    out = []
    for ep in range(cfg.episodes):
        ss = np.random.SeedSequence(entropy=(cfg.seed, ep))
        out.append(run_episode(
            shield, env, control, inference, cfg.budget, max_steps, ss,
            episode=ep, flags=flags, ledger=shared, record_sink=record_sink))

    rets = [e.ret for e in out]
    return ExperimentStats(
        episodes=out,
        crashes=sum(1 for e in out if e.crash),
        mean_return=float(np.mean(rets)) if rets else 0.0,
        overrides=sum(e.overrides for e in out),
        eps_spent=math.fsum(e.eps_spent for e in out),
        ledger_error=max((e.ledger_error for e in out), default=0.0),
        reuse_violations=sum(e.reuse_violations for e in out),
        shield_seconds=sum(e.shield_seconds for e in out),
        env_seconds=sum(e.env_seconds for e in out),
        steps=sum(e.steps for e in out))
