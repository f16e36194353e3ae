"""Parsing of ``.shield`` specification files.

A file consists of up to thirteen keyword-introduced sections in a fixed
order (each at most once)::

    constant unknown assume bound controller plant safe invariant
    noise observe fallback initial infer

``#`` starts a line comment; layout is otherwise free.  Names declared under
``constant`` and ``unknown`` are treated as function symbols everywhere below
their declaration; all other names are variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .dl import (
    BoolLit, Formula, HybridProgram, Ident, Term, Var, free_vars,
)
from .dl.parser import ParseError, Parser, tokenize, _RESERVED
from .dl.transform import resolve_symbols
from .strategy import (
    Aggregate, Best, Direct, DistExpr, InferAssign, InferenceStrategy,
)

SECTION_ORDER = (
    "constant", "unknown", "assume", "bound", "controller", "plant", "safe",
    "invariant", "noise", "observe", "fallback", "initial", "infer",
)

_SPEC_KEYWORDS = frozenset(SECTION_ORDER) | frozenset(
    {"best", "aggregate", "when", "and", "left", "right", "else", "up", "lo"})


@dataclass(frozen=True)
class BoundDecl:
    param: Ident
    direction: str  # 'up' | 'lo'
    formula: Formula
    locality: str = ""  # 'local' | 'global', filled in by classification


@dataclass(frozen=True)
class NoiseDecl:
    var: Ident
    dist: DistExpr


@dataclass(frozen=True)
class ObsDecl:
    var: Ident
    definition: Term


#: one directive per nondeterministic site, in pre-order: a branch side for
#: every choice, a term for every unconstrained assignment
FallbackTemplate = tuple[Union[str, Term], ...]


@dataclass(frozen=True)
class FallbackDecl:
    """Guarded templates tried in order; the final case must be unguarded."""

    cases: tuple[tuple[Optional[Formula], FallbackTemplate], ...]


@dataclass
class ShieldSpec:
    name: str
    consts: tuple[str, ...]
    unknowns: tuple[tuple[str, int], ...]
    assumptions: tuple[Formula, ...]
    bounds: tuple[BoundDecl, ...]
    ctrl: HybridProgram
    plant: HybridProgram
    safe: Formula
    invariant: Formula
    noise: tuple[NoiseDecl, ...]
    obs: tuple[ObsDecl, ...]
    fallback: Optional[FallbackDecl]
    initial_global_bounds: Optional[dict[Ident, Term]]
    infer: InferenceStrategy
    source_text: str = ""
    state_vars: frozenset[Ident] = frozenset()

    def __post_init__(self):
        self.state_vars = self._infer_state_vars()
        by_state = self._classify()
        self.bounds = tuple(
            BoundDecl(b.param, b.direction, b.formula,
                      "local" if by_state[b.param] else "global")
            for b in self.bounds)

    # -- derived views -------------------------------------------------

    @property
    def param_idents(self) -> tuple[Ident, ...]:
        return tuple(b.param for b in self.bounds)

    @property
    def directions(self) -> dict[Ident, str]:
        return {b.param: b.direction for b in self.bounds}

    @property
    def bound_formulas(self) -> dict[Ident, Formula]:
        return {b.param: b.formula for b in self.bounds}

    @property
    def local_params(self) -> tuple[Ident, ...]:
        return tuple(b.param for b in self.bounds if b.locality == "local")

    @property
    def global_params(self) -> tuple[Ident, ...]:
        return tuple(b.param for b in self.bounds if b.locality == "global")

    @property
    def obs_names(self) -> frozenset[str]:
        return frozenset(o.var.name for o in self.obs)

    @property
    def noise_names(self) -> frozenset[str]:
        return frozenset(n.var.name for n in self.noise)

    @property
    def noise_decls(self) -> dict[str, DistExpr]:
        return {n.var.name: n.dist for n in self.noise}

    @property
    def obs_defs(self) -> dict[str, Term]:
        return {o.var.name: o.definition for o in self.obs}

    @property
    def symbol_names(self) -> frozenset[str]:
        return frozenset(self.consts) | frozenset(n for n, _ in self.unknowns)

    def all_free_vars(self) -> set[Ident]:
        out: set[Ident] = set()
        for f in self.assumptions:
            out |= free_vars(f)
        for b in self.bounds:
            out |= free_vars(b.formula)
        out |= free_vars(self.ctrl)
        out |= free_vars(self.plant)
        out |= free_vars(self.safe)
        out |= free_vars(self.invariant)
        for n in self.noise:
            for t in n.dist.params:
                out |= free_vars(t)
        for o in self.obs:
            out |= free_vars(o.definition)
        for a in self.infer:
            out |= free_vars(a.guard)
            body = a.body
            if isinstance(body, Direct):
                out |= free_vars(body.term)
            elif isinstance(body, Best):
                out |= free_vars(body.term)
            else:
                out |= free_vars(body.observable) | free_vars(body.noise)
        if self.fallback:
            for guard, template in self.fallback.cases:
                if guard is not None:
                    out |= free_vars(guard)
                for d in template:
                    if not isinstance(d, str):
                        out |= free_vars(d)
        if self.initial_global_bounds:
            for t in self.initial_global_bounds.values():
                out |= free_vars(t)
        return out

    def _infer_state_vars(self) -> frozenset[Ident]:
        special = (frozenset(str(p) for p in (b.param for b in self.bounds))
                   | self.obs_names | self.noise_names)
        out = set()
        for ident in self.all_free_vars():
            if ident.name in special:
                continue
            out.add(Ident(ident.name))
        return frozenset(out)

    def _classify(self) -> dict[Ident, bool]:
        state_names = {v.name for v in self.state_vars}
        out = {}
        for b in self.bounds:
            fv = free_vars(b.formula)
            out[b.param] = any(v.name in state_names and v != b.param for v in fv)
        return out


def classify_bounds(spec: ShieldSpec) -> dict[Ident, str]:
    """Partition parameters by free state-variable occurrence in their bound."""
    return {b.param: b.locality for b in spec.bounds}


class _SpecParser(Parser):
    reserved = _RESERVED | _SPEC_KEYWORDS

    def __init__(self, tokens, symbols: set[str]):
        super().__init__(tokens)
        self.symbols = symbols

    def resolved_term(self):
        return resolve_symbols(self.term(), frozenset(self.symbols))

    def resolved_formula(self):
        return resolve_symbols(self.formula(), frozenset(self.symbols))

    def resolved_program(self):
        return resolve_symbols(self.program(), frozenset(self.symbols))

    def at_section(self) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.text in SECTION_ORDER

    def done(self) -> bool:
        return self.peek().kind == "eof" or self.at_section()


def parse_spec(text: str, name: str = "spec") -> ShieldSpec:
    """Parse a complete ``.shield`` document."""
    tokens = tokenize(text)
    p = _SpecParser(tokens, set())

    sections: dict[str, None] = {}
    parts: dict = {
        "constant": (), "unknown": (), "assume": (), "bound": (),
        "controller": None, "plant": None, "safe": None, "invariant": None,
        "noise": (), "observe": (), "fallback": None, "initial": None,
        "infer": (),
    }

    last_rank = -1
    while p.peek().kind != "eof":
        t = p.peek()
        if not p.at_section():
            raise ParseError(f"expected a section keyword, got {t.text!r}",
                             t.line, t.col, SECTION_ORDER)
        section = t.text
        rank = SECTION_ORDER.index(section)
        if section in sections:
            raise ParseError(f"duplicate section {section!r}", t.line, t.col)
        if rank < last_rank:
            raise ParseError(
                f"section {section!r} out of order (must follow the order "
                f"{', '.join(SECTION_ORDER)})", t.line, t.col)
        sections[section] = None
        last_rank = rank
        p.next()
        parts[section] = _SECTION_PARSERS[section](p)

    for required in ("controller", "plant", "safe", "invariant"):
        if required not in sections:
            raise ParseError(f"missing required section {required!r}")

    return ShieldSpec(
        name=name,
        consts=parts["constant"],
        unknowns=parts["unknown"],
        assumptions=parts["assume"],
        bounds=parts["bound"],
        ctrl=parts["controller"],
        plant=parts["plant"],
        safe=parts["safe"],
        invariant=parts["invariant"],
        noise=parts["noise"],
        obs=parts["observe"],
        fallback=parts["fallback"],
        initial_global_bounds=parts["initial"],
        infer=parts["infer"],
        source_text=text,
    )


def load_spec(path) -> ShieldSpec:
    import os
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    base = os.path.splitext(os.path.basename(str(path)))[0]
    return parse_spec(text, name=base)


# -- section payload parsers -------------------------------------------------

def _parse_constants(p: _SpecParser):
    names = []
    while True:
        names.append(p.ident().name)
        if not p.accept(","):
            break
    p.symbols.update(names)
    return tuple(names)


def _parse_unknowns(p: _SpecParser):
    out = []
    while True:
        name = p.ident().name
        arity = 0
        if p.accept("("):
            arity = 1
            p.expect("*")
            while p.accept(","):
                p.expect("*")
                arity += 1
            p.expect(")")
        out.append((name, arity))
        if not p.accept(","):
            break
    p.symbols.update(n for n, _ in out)
    return tuple(out)


def _parse_assume(p: _SpecParser):
    out = [p.resolved_formula()]
    while p.accept(","):
        out.append(p.resolved_formula())
    return tuple(out)


def _parse_bounds(p: _SpecParser):
    out = []
    while True:
        param = p.ident()
        direction = None
        if p.at("up") or p.at("lo"):
            direction = p.next().text
        p.expect(":")
        formula = p.resolved_formula()
        if direction is None:
            direction = _infer_direction(param, formula)
            if direction is None:
                raise ParseError(
                    f"bound direction for {param} is not inferrable; "
                    "annotate it with 'up' or 'lo'")
        out.append(BoundDecl(param, direction, formula))
        if not p.accept(","):
            break
    return tuple(out)


def _infer_direction(param: Ident, formula) -> Optional[str]:
    from .dl.syntax import Cmp
    if not isinstance(formula, Cmp) or formula.op not in ("<=", ">=", "<", ">"):
        return None
    le = formula.op in ("<=", "<")
    if formula.left == Var(param):
        return "lo" if le else "up"
    if formula.right == Var(param):
        return "up" if le else "lo"
    return None


def _parse_noise(p: _SpecParser):
    out = []
    while True:
        v = p.ident()
        p.expect("~")
        kind_tok = p.next()
        kinds = {"N": "normal", "U": "uniform", "B": "bernoulli"}
        if kind_tok.text not in kinds:
            raise ParseError("expected a distribution N(..), U(..) or B(..)",
                             kind_tok.line, kind_tok.col)
        p.expect("(")
        params = [p.resolved_term()]
        while p.accept(","):
            params.append(p.resolved_term())
        p.expect(")")
        kind = kinds[kind_tok.text]
        want = 1 if kind == "bernoulli" else 2
        if len(params) != want:
            raise ParseError(f"{kind_tok.text}(..) takes {want} parameter(s)",
                             kind_tok.line, kind_tok.col)
        out.append(NoiseDecl(v, DistExpr(kind, tuple(params))))
        if not p.accept(","):
            break
    return tuple(out)


def _parse_observe(p: _SpecParser):
    out = []
    while True:
        v = p.ident()
        p.expect("=")
        out.append(ObsDecl(v, p.resolved_term()))
        if not p.accept(","):
            break
    return tuple(out)


def _parse_fallback(p: _SpecParser):
    cases = []
    if p.at("when"):
        while p.accept("when"):
            guard = p.resolved_formula()
            p.expect(":")
            cases.append((guard, _parse_template(p)))
        p.expect("else")
        p.expect(":")
        cases.append((None, _parse_template(p)))
    else:
        cases.append((None, _parse_template(p)))
    return FallbackDecl(tuple(cases))


def _parse_template(p: _SpecParser) -> FallbackTemplate:
    out = []
    while True:
        if p.at("left") or p.at("right"):
            out.append(p.next().text)
        else:
            out.append(p.resolved_term())
        if not p.accept(","):
            break
    return tuple(out)


def _parse_initial(p: _SpecParser):
    out = {}
    while True:
        v = p.ident()
        p.expect("=")
        out[v] = p.resolved_term()
        if not p.accept(","):
            break
    return out


def _parse_infer(p: _SpecParser) -> InferenceStrategy:
    out: list[InferAssign] = []
    while True:
        targets = [p.ident()]
        while p.accept(","):
            targets.append(p.ident())
        p.expect(":=")
        body = _parse_infer_body(p)
        guard: Formula = BoolLit(True)
        if p.accept("when"):
            guard = p.resolved_formula()
        # merged-assignment sugar expands into one assignment per target
        for tgt in targets:
            out.append(InferAssign(tgt, body, guard))
        if not p.accept(";"):
            break
        if p.done():
            break
    return tuple(out)


def _parse_infer_body(p: _SpecParser):
    if p.accept("best"):
        idx = _parse_index_names(p)
        p.expect(":")
        return Best(idx, p.resolved_term())
    if p.accept("aggregate"):
        idx = _parse_index_names(p)
        p.expect(":")
        observable = p.resolved_term()
        p.expect("and")
        noise = p.resolved_term()
        return Aggregate(idx, observable, noise)
    return Direct(p.resolved_term())


def _parse_index_names(p: _SpecParser) -> tuple[str, ...]:
    names = [p.ident()]
    while p.accept(","):
        names.append(p.ident())
    for n in names:
        if n.index is not None:
            raise ParseError(f"index name {n} must be unindexed")
    return tuple(n.name for n in names)


_SECTION_PARSERS = {
    "constant": _parse_constants,
    "unknown": _parse_unknowns,
    "assume": _parse_assume,
    "bound": _parse_bounds,
    "controller": lambda p: p.resolved_program(),
    "plant": lambda p: p.resolved_program(),
    "safe": lambda p: p.resolved_formula(),
    "invariant": lambda p: p.resolved_formula(),
    "noise": _parse_noise,
    "observe": _parse_observe,
    "fallback": _parse_fallback,
    "initial": _parse_initial,
    "infer": _parse_infer,
}
