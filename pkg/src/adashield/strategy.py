"""Inference strategies: action spaces, interpretation into symbolic
assignments, and staged evaluation of symbolic bound instantiations.

A strategy is an ordered list of assignments (direct / best / aggregate, each
with an optional guard).  Interpreting a strategy under an inference action
yields symbolic bound instantiations (SBIs) that are later evaluated against
a valuation assembled from the current state, bound values and index-tagged
history.  Evaluation is staged deliberately: SBIs are built without access to
measurement values, so the weights and tolerances feeding them cannot depend
on the data they will aggregate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .dl import (
    Abs, App, BinOp, BoolLit, Formula, Ident, Lit, Neg, Term, UNDEF, Var,
    eval_formula, eval_term, free_vars, instantiate_indices, tag_with_index,
)
from .dl.syntax import conj
from . import tailbounds
from .tailbounds import Dist, DomainError


class BottomType:
    """Failure value of SBI evaluation."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BOTTOM"


BOTTOM = BottomType()


# ---------------------------------------------------------------------------
# Strategy abstract syntax

@dataclass(frozen=True)
class DistExpr:
    """Distribution expression with term hyperparameters: N(mu, var) /
    U(lo, hi) / B(p)."""

    kind: str  # 'normal' | 'uniform' | 'bernoulli'
    params: tuple[Term, ...]


@dataclass(frozen=True)
class Direct:
    term: Term


@dataclass(frozen=True)
class Best:
    indices: tuple[str, ...]
    term: Term


@dataclass(frozen=True)
class Aggregate:
    indices: tuple[str, ...]
    observable: Term
    noise: Term


@dataclass(frozen=True)
class InferAssign:
    target: Ident
    body: Union[Direct, Best, Aggregate]
    guard: Formula = BoolLit(True)


InferenceStrategy = tuple[InferAssign, ...]


# ---------------------------------------------------------------------------
# Inference actions

@dataclass(frozen=True)
class AggregateAction:
    """(eps, finite distribution over index tuples); weights are normalized
    on construction and must be strictly positive."""

    eps: float
    dist: tuple[tuple[float, tuple[int, ...]], ...]

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")
        if not self.dist:
            raise ValueError("empty aggregation distribution")
        total = math.fsum(w for w, _ in self.dist)
        if total <= 0.0 or any(w <= 0.0 for w, _ in self.dist):
            raise ValueError("weights must be strictly positive")
        if abs(total - 1.0) > 1e-12:
            object.__setattr__(
                self, "dist",
                tuple((w / total, j) for w, j in self.dist))


#: per-slot actions: None skips best/aggregate slots; direct slots ignore it
SlotAction = Union[None, tuple[tuple[int, ...], ...], AggregateAction]
InferenceAction = tuple[SlotAction, ...]


class ActionShapeError(Exception):
    pass


def strategy_action_space(strategy: InferenceStrategy) -> tuple[tuple[str, int], ...]:
    """Slot descriptors ('direct', 0) / ('best', n) / ('aggregate', n)."""
    out = []
    for a in strategy:
        if isinstance(a.body, Direct):
            out.append(("direct", 0))
        elif isinstance(a.body, Best):
            out.append(("best", len(a.body.indices)))
        else:
            out.append(("aggregate", len(a.body.indices)))
    return tuple(out)


def validate_action(strategy: InferenceStrategy, action: InferenceAction) -> None:
    space = strategy_action_space(strategy)
    if len(action) != len(space):
        raise ActionShapeError(
            f"expected {len(space)} slots, got {len(action)}")
    for slot, (kind, n) in zip(action, space):
        if slot is None:
            continue
        if kind == "direct":
            raise ActionShapeError("direct slots take no action input")
        if kind == "best":
            if not isinstance(slot, tuple) or any(
                    not isinstance(j, tuple) or len(j) != n for j in slot):
                raise ActionShapeError(f"best slot expects {n}-tuples of indices")
        else:
            if not isinstance(slot, AggregateAction):
                raise ActionShapeError("aggregate slot expects (eps, dist)")
            if any(len(j) != n for _, j in slot.dist):
                raise ActionShapeError(f"aggregate slot expects {n}-tuples of indices")


def empty_action(strategy: InferenceStrategy) -> InferenceAction:
    return tuple(None for _ in strategy)


# ---------------------------------------------------------------------------
# Symbolic bound instantiations

@dataclass(frozen=True)
class TermSBI:
    term: Term


@dataclass(frozen=True)
class SumSBI:
    left: "SBI"
    right: "SBI"


@dataclass(frozen=True)
class GuardedSBI:
    body: "SBI"
    guard: Formula


@dataclass(frozen=True)
class InvCCDFNode:
    """Bound noise variables with their distributions, a target linear in
    those variables, a tolerance term and the tail side."""

    bindings: tuple[tuple[Ident, DistExpr], ...]
    target: Term
    eps: Term
    tail: str = "up"  # 'up' | 'lo'


SBI = Union[TermSBI, SumSBI, GuardedSBI, InvCCDFNode]


@dataclass(frozen=True)
class SymbolicAssignment:
    param: Ident
    sbi: SBI
    eps: float


def interpret_strategy(strategy: InferenceStrategy, action: InferenceAction,
                       direction_of: dict[Ident, str],
                       noise_decls: dict[str, DistExpr]) -> list[SymbolicAssignment]:
    """Map an inference action to the list of symbolic inference assignments."""
    validate_action(strategy, action)
    out: list[SymbolicAssignment] = []
    for assign, slot in zip(strategy, action):
        p = assign.target
        body = assign.body
        if isinstance(body, Direct):
            out.append(SymbolicAssignment(p, GuardedSBI(TermSBI(body.term), assign.guard), 0.0))
            continue
        if slot is None:
            continue
        names = list(body.indices)
        if isinstance(body, Best):
            for j in slot:
                term = instantiate_indices(body.term, names, list(j))
                guard = instantiate_indices(assign.guard, names, list(j))
                out.append(SymbolicAssignment(p, GuardedSBI(TermSBI(term), guard), 0.0))
            continue
        # aggregate
        obs_sum = None
        noise_sum = None
        guards = []
        bindings: dict[Ident, DistExpr] = {}
        for w, j in slot.dist:
            vals = list(j)
            obs_j = BinOp("*", Lit(w), instantiate_indices(body.observable, names, vals))
            noise_j = BinOp("*", Lit(w), instantiate_indices(body.noise, names, vals))
            obs_sum = obs_j if obs_sum is None else BinOp("+", obs_sum, obs_j)
            noise_sum = noise_j if noise_sum is None else BinOp("+", noise_sum, noise_j)
            guards.append(instantiate_indices(assign.guard, names, vals))
            for ident in free_vars(noise_j):
                if ident.name in noise_decls and ident not in bindings:
                    decl = noise_decls[ident.name]
                    tagged = tuple(
                        tag_with_index(t, ident.index) if ident.index is not None else t
                        for t in decl.params)
                    bindings[ident] = DistExpr(decl.kind, tagged)
        node = InvCCDFNode(tuple(sorted(bindings.items(), key=lambda kv: str(kv[0]))),
                           noise_sum, Lit(slot.eps),
                           tail=("lo" if direction_of.get(p) == "lo" else "up"))
        sbi = GuardedSBI(SumSBI(TermSBI(obs_sum), node), conj(guards))
        out.append(SymbolicAssignment(p, sbi, slot.eps))
    return out


def referenced_indices(assignments: list[SymbolicAssignment]) -> set[int]:
    """Concrete history indices mentioned by any SBI."""
    out: set[int] = set()
    for a in assignments:
        for ident in sbi_free_vars(a.sbi):
            if isinstance(ident.index, int):
                out.add(ident.index)
    return out


def referenced_observations(assignments: list[SymbolicAssignment],
                            obs_names: frozenset[str]) -> set[Ident]:
    out: set[Ident] = set()
    for a in assignments:
        for ident in sbi_free_vars(a.sbi):
            if isinstance(ident.index, int) and ident.name in obs_names:
                out.add(ident)
    return out


def sbi_free_vars(e: SBI) -> set[Ident]:
    if isinstance(e, TermSBI):
        return free_vars(e.term)
    if isinstance(e, SumSBI):
        return sbi_free_vars(e.left) | sbi_free_vars(e.right)
    if isinstance(e, GuardedSBI):
        return sbi_free_vars(e.body) | free_vars(e.guard)
    out = free_vars(e.target) | free_vars(e.eps)
    for ident, dist in e.bindings:
        out.add(ident)
        for t in dist.params:
            out |= free_vars(t)
    return out


# ---------------------------------------------------------------------------
# SBI evaluation

def eval_sbi(e: SBI, interp, val, config=None):
    """Evaluate to a float or ``BOTTOM``; returns ``(value, meta)`` where
    ``meta['methods']`` lists the tail-bound methods used."""
    meta: dict = {"methods": []}
    v = _eval_sbi(e, interp, val, meta, config)
    return v, meta


def _eval_sbi(e: SBI, interp, val, meta, config):
    t = type(e)
    if t is TermSBI:
        r = eval_term(e.term, interp, val)
        return BOTTOM if r is UNDEF else r
    if t is SumSBI:
        a = _eval_sbi(e.left, interp, val, meta, config)
        if a is BOTTOM:
            return BOTTOM
        b = _eval_sbi(e.right, interp, val, meta, config)
        if b is BOTTOM:
            return BOTTOM
        return a + b
    if t is GuardedSBI:
        g = eval_formula(e.guard, interp, val)
        if g is UNDEF or not g:
            return BOTTOM
        return _eval_sbi(e.body, interp, val, meta, config)
    if t is InvCCDFNode:
        return _eval_invccdf(e, interp, val, meta, config)
    raise TypeError(f"not an SBI: {e!r}")


def _eval_invccdf(node: InvCCDFNode, interp, val, meta, config):
    eps = eval_term(node.eps, interp, val)
    if eps is UNDEF:
        return BOTTOM
    dists: dict[Ident, Dist] = {}
    for ident, dx in node.bindings:
        params = []
        for t in dx.params:
            r = eval_term(t, interp, val)
            if r is UNDEF:
                return BOTTOM
            params.append(r)
        if dx.kind == "normal":
            d = Dist("normal", params[0], params[1])
        elif dx.kind == "uniform":
            d = Dist("uniform", params[0], params[1])
        else:
            d = Dist("bernoulli", params[0])
        try:
            d.validate()
        except ValueError:
            return BOTTOM
        dists[ident] = d
    lin = linearize(node.target, interp, val, frozenset(dists))
    if lin is None:
        return BOTTOM
    c0, coeffs = lin
    pairs = [(c, dists[ident]) for ident, c in coeffs.items()]
    allow_cantelli = bool(config and getattr(config, "allow_cantelli", False))
    try:
        r = tailbounds.invccdf(pairs, c0, eps, tail=node.tail,
                               allow_cantelli=allow_cantelli)
    except DomainError:
        raise
    if r is None:
        return BOTTOM
    value, method = r
    meta["methods"].append(method)
    if not math.isfinite(value):
        return BOTTOM
    return value


def linearize(term: Term, interp, val, noise_vars: frozenset[Ident]):
    """Reduce ``term`` to ``c0 + sum c_i * eta_i`` after substituting every
    non-noise variable with its value; ``None`` if not syntactically linear."""
    r = _lin(term, interp, val, noise_vars)
    if r is None:
        return None
    c0, coeffs = r
    return c0, {k: v for k, v in coeffs.items() if v != 0.0}


def _lin(t: Term, interp, val, nv):
    tt = type(t)
    if tt is Var and t.ident in nv:
        return 0.0, {t.ident: 1.0}
    if tt in (Lit, Var, App):
        r = eval_term(t, interp, val)
        return None if r is UNDEF else (r, {})
    if tt is Neg:
        r = _lin(t.arg, interp, val, nv)
        if r is None:
            return None
        c0, cs = r
        return -c0, {k: -v for k, v in cs.items()}
    if tt is Abs:
        # |.| must be noise-free to stay linear
        r = eval_term(t, interp, val)
        return None if r is UNDEF else (r, {})
    if tt is BinOp:
        op = t.op
        if op in ("+", "-"):
            a = _lin(t.left, interp, val, nv)
            b = _lin(t.right, interp, val, nv)
            if a is None or b is None:
                return None
            sgn = 1.0 if op == "+" else -1.0
            c0 = a[0] + sgn * b[0]
            cs = dict(a[1])
            for k, v in b[1].items():
                cs[k] = cs.get(k, 0.0) + sgn * v
            return c0, cs
        if op == "*":
            a = _lin(t.left, interp, val, nv)
            b = _lin(t.right, interp, val, nv)
            if a is None or b is None:
                return None
            if a[1] and b[1]:
                return None  # product of two noise-carrying factors
            if b[1]:
                a, b = b, a
            scale = b[0]
            return a[0] * scale, {k: v * scale for k, v in a[1].items()}
        if op == "/":
            a = _lin(t.left, interp, val, nv)
            b = _lin(t.right, interp, val, nv)
            if a is None or b is None or b[1] or b[0] == 0.0:
                return None
            inv = 1.0 / b[0]
            return a[0] * inv, {k: v * inv for k, v in a[1].items()}
        # min/max/^ must be noise-free
        r = eval_term(t, interp, val)
        return None if r is UNDEF else (r, {})
    return None
