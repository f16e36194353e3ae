"""Deterministic ASCII rendering of terms, formulas and hybrid programs.

The output round-trips through :mod:`adashield.dl.parser`: for every tree
``e``, ``parse(print(e))`` is AST-equal to ``e`` (given the same symbol set).
"""

from __future__ import annotations

from .syntax import (
    Abs, And, App, Assign, AssignAny, BinOp, BoolLit, Box, Choice, Cmp, Dia,
    Exists, Forall, Lit, Loop, Neg, Not, ODE, Or, Imp, Seq, Test, Var,
)

# term precedence levels (higher binds tighter)
_ADD, _MUL, _POW, _UNARY, _ATOM = 1, 2, 3, 4, 5


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def print_term(t, prec: int = 0) -> str:
    tt = type(t)
    if tt is Lit:
        s = _num(t.value)
        if t.value < 0 and prec >= _UNARY:
            return f"({s})"
        return s
    if tt is Var:
        return str(t.ident)
    if tt is App:
        if not t.args:
            return t.func
        return f"{t.func}({', '.join(print_term(a) for a in t.args)})"
    if tt is Abs:
        return f"abs({print_term(t.arg)})"
    if tt is Neg:
        s = f"-{print_term(t.arg, _UNARY)}"
        return f"({s})" if prec >= _UNARY else s
    if tt is BinOp:
        op = t.op
        if op in ("min", "max"):
            return f"{op}({print_term(t.left)}, {print_term(t.right)})"
        if op in ("+", "-"):
            lvl = _ADD
        elif op in ("*", "/"):
            lvl = _MUL
        else:  # '^'
            lvl = _POW
        # left-associative at + - * /; '^' takes an atom exponent
        left = print_term(t.left, lvl if op != "^" else _POW + 1)
        right = print_term(t.right, lvl + 1)
        s = f"{left} {op} {right}" if op != "^" else f"{left}^{right}"
        return f"({s})" if prec > lvl else s
    raise TypeError(f"not a term: {t!r}")


# formula precedence: -> (1) | (2) & (3) unary (4)
_IMP, _OR, _AND, _FUNARY = 1, 2, 3, 4


def print_formula(f, prec: int = 0) -> str:
    ft = type(f)
    if ft is BoolLit:
        return "true" if f.value else "false"
    if ft is Cmp:
        return f"{print_term(f.left)} {f.op} {print_term(f.right)}"
    if ft is Not:
        return f"!{print_formula(f.arg, _FUNARY)}"
    if ft is And:
        s = f"{print_formula(f.left, _AND)} & {print_formula(f.right, _AND + 1)}"
        return f"({s})" if prec > _AND else s
    if ft is Or:
        s = f"{print_formula(f.left, _OR)} | {print_formula(f.right, _OR + 1)}"
        return f"({s})" if prec > _OR else s
    if ft is Imp:
        # right-associative
        s = f"{print_formula(f.left, _IMP + 1)} -> {print_formula(f.right, _IMP)}"
        return f"({s})" if prec > _IMP else s
    if ft is Forall:
        return f"\\forall {f.var} {print_formula(f.body, _FUNARY)}"
    if ft is Exists:
        return f"\\exists {f.var} {print_formula(f.body, _FUNARY)}"
    if ft is Box:
        return f"[{print_program(f.prog)}] {print_formula(f.post, _FUNARY)}"
    if ft is Dia:
        return f"<{print_program(f.prog)}> {print_formula(f.post, _FUNARY)}"
    raise TypeError(f"not a formula: {f!r}")


# program precedence: ++ (1) ; (2) atom (3)
_CHOICE, _SEQ, _PATOM = 1, 2, 3


def print_program(p, prec: int = 0) -> str:
    pt = type(p)
    if pt is Assign:
        return f"{p.var} := {print_term(p.term)}"
    if pt is AssignAny:
        return f"{p.var} := *"
    if pt is Test:
        return f"?({print_formula(p.cond)})"
    if pt is ODE:
        eqs = ", ".join(f"{x}' = {print_term(e)}" for x, e in p.eqs)
        if p.domain == BoolLit(True):
            return f"{{{eqs}}}"
        return f"{{{eqs} & {print_formula(p.domain)}}}"
    if pt is Choice:
        # right-associative
        s = f"{print_program(p.left, _CHOICE + 1)} ++ {print_program(p.right, _CHOICE)}"
        return f"{{ {s} }}" if prec > _CHOICE else s
    if pt is Seq:
        s = f"{print_program(p.left, _SEQ + 1)}; {print_program(p.right, _SEQ)}"
        return f"{{ {s} }}" if prec > _SEQ else s
    if pt is Loop:
        return f"{{ {print_program(p.body)} }}*"
    raise TypeError(f"not a program: {p!r}")


def pretty_print(e) -> str:
    """Render any term, formula or hybrid program."""
    t = type(e)
    if t in (Lit, Var, App, Neg, Abs, BinOp):
        return print_term(e)
    if t in (Cmp, BoolLit, Not, And, Or, Imp, Forall, Exists, Box, Dia):
        return print_formula(e)
    return print_program(e)
