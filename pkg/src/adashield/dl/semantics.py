"""Three-valued evaluation of terms and quantifier-free formulas.

Evaluation never raises on missing bindings or partial operations: it returns
the ``UNDEF`` sentinel instead, which propagates strictly through every
connective.  Quantifiers and modalities are not evaluable and raise
:class:`StructuralError`.
"""

from __future__ import annotations

import math
from typing import Callable, Mapping, Union

from .syntax import (
    Abs, And, App, BinOp, BoolLit, Box, Cmp, Dia, Exists, Forall, Formula,
    Ident, Imp, Lit, Neg, Not, Or, Term, Var,
)


class Undefined:
    """Singleton bottom value for partial evaluation."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEF"


UNDEF = Undefined()

#: interpretation: arity-0 symbols map to reals, others to callables
Interpretation = Mapping[str, Union[float, Callable[..., float]]]
#: partial valuation of identifiers
Valuation = Mapping[Ident, float]


class StructuralError(Exception):
    """Raised when evaluating a construct with no runtime denotation."""


def eval_term(t: Term, interp: Interpretation, val: Valuation):
    """Evaluate ``t``; returns a finite float or ``UNDEF``."""
    tt = type(t)
    if tt is Lit:
        return t.value
    if tt is Var:
        v = val.get(t.ident, UNDEF)
        return v
    if tt is BinOp:
        a = eval_term(t.left, interp, val)
        if a is UNDEF:
            return UNDEF
        b = eval_term(t.right, interp, val)
        if b is UNDEF:
            return UNDEF
        op = t.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                return UNDEF
            return a / b
        if op == "min":
            return a if a <= b else b
        if op == "max":
            return a if a >= b else b
        if op == "^":
            # exponent restricted to natural literals at construction/parse time
            if b != int(b) or b < 0:
                return UNDEF
            r = a ** int(b)
            if not math.isfinite(r):
                return UNDEF
            return r
        raise StructuralError(f"unknown operator {op!r}")
    if tt is Neg:
        a = eval_term(t.arg, interp, val)
        return UNDEF if a is UNDEF else -a
    if tt is Abs:
        a = eval_term(t.arg, interp, val)
        return UNDEF if a is UNDEF else abs(a)
    if tt is App:
        f = interp.get(t.func, UNDEF)
        if f is UNDEF:
            return UNDEF
        if not t.args:
            if callable(f):
                return float(f())
            return f
        args = []
        for arg in t.args:
            a = eval_term(arg, interp, val)
            if a is UNDEF:
                return UNDEF
            args.append(a)
        if not callable(f):
            raise StructuralError(f"symbol {t.func!r} applied to arguments but bound to a real")
        r = float(f(*args))
        if not math.isfinite(r):
            return UNDEF
        return r
    raise StructuralError(f"not a term: {t!r}")


def eval_formula(f: Formula, interp: Interpretation, val: Valuation):
    """Evaluate a quantifier-free, modality-free formula to bool or ``UNDEF``."""
    ft = type(f)
    if ft is Cmp:
        a = eval_term(f.left, interp, val)
        if a is UNDEF:
            return UNDEF
        b = eval_term(f.right, interp, val)
        if b is UNDEF:
            return UNDEF
        op = f.op
        if op == "=":
            return a == b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">=":
            return a >= b
        return a > b
    if ft is BoolLit:
        return f.value
    if ft is Not:
        a = eval_formula(f.arg, interp, val)
        return UNDEF if a is UNDEF else (not a)
    # connectives use strong Kleene logic: a decided operand can absorb an
    # undefined one (false & U = false, true | U = true), which keeps
    # division-guarded disjunctions evaluable
    if ft is And:
        a = eval_formula(f.left, interp, val)
        if a is False:
            return False
        b = eval_formula(f.right, interp, val)
        if b is False:
            return False
        return UNDEF if (a is UNDEF or b is UNDEF) else True
    if ft is Or:
        a = eval_formula(f.left, interp, val)
        if a is True:
            return True
        b = eval_formula(f.right, interp, val)
        if b is True:
            return True
        return UNDEF if (a is UNDEF or b is UNDEF) else False
    if ft is Imp:
        a = eval_formula(f.left, interp, val)
        if a is False:
            return True
        b = eval_formula(f.right, interp, val)
        if b is True:
            return True
        return UNDEF if (a is UNDEF or b is UNDEF) else False
    if ft in (Forall, Exists, Box, Dia):
        raise StructuralError(f"cannot evaluate quantified/modal formula: {ft.__name__}")
    raise StructuralError(f"not a formula: {f!r}")


def is_runtime_evaluable(f: Formula) -> bool:
    """True iff ``f`` is quantifier-free and modality-free."""
    ft = type(f)
    if ft in (Cmp, BoolLit):
        return True
    if ft is Not:
        return is_runtime_evaluable(f.arg)
    if ft in (And, Or, Imp):
        return is_runtime_evaluable(f.left) and is_runtime_evaluable(f.right)
    return False
