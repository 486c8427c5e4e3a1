"""Quantifier-free constraint language over typed observable variables.

Observables are declared in a :class:`Signature` with one of three sorts:
bounded integers, booleans, or enumerations.  Formulas are boolean
combinations of comparisons between integer terms, boolean observables and
enumeration literals.  Evaluation is exact integer arithmetic; enumeration
values compare by label identity only.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Union

Value = Union[int, bool, str]

_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")
_RESERVED = frozenset({"true", "false"})


class FormulaError(Exception):
    """Base class for constraint-language diagnostics."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)
        self.line = line
        self.col = col


class FormulaSyntaxError(FormulaError):
    pass


class UnknownObservableError(FormulaError):
    pass


class SortMismatchError(FormulaError):
    pass


# ---------------------------------------------------------------------------
# Sorts and signatures


@dataclass(frozen=True)
class BoundedInt:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty integer sort {self.lo}..{self.hi}")

    def contains(self, v: Value) -> bool:
        return isinstance(v, int) and not isinstance(v, bool) and self.lo <= v <= self.hi

    def __str__(self):
        return f"int {self.lo}..{self.hi}"


@dataclass(frozen=True)
class BoolSort:
    def contains(self, v: Value) -> bool:
        return isinstance(v, bool)

    def __str__(self):
        return "bool"


@dataclass(frozen=True)
class EnumSort:
    labels: tuple[str, ...]

    def __post_init__(self):
        if not self.labels:
            raise ValueError("enum sort needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate enum labels in {self.labels}")
        for lab in self.labels:
            if not _IDENT_RE.match(lab) or lab in _RESERVED:
                raise ValueError(f"bad enum label {lab!r}")

    def contains(self, v: Value) -> bool:
        return v in self.labels

    def __str__(self):
        return "enum { %s }" % ", ".join(self.labels)


Sort = Union[BoundedInt, BoolSort, EnumSort]


class Signature:
    """Ordered collection of typed observables.

    Enum labels must be unique across the whole signature and disjoint from
    observable names, so that a bare identifier in a formula resolves
    unambiguously to either a variable or an enumeration literal.
    """

    def __init__(self, observables: Iterable[tuple[str, Sort]]):
        self._sorts: dict[str, Sort] = {}
        self._label_sorts: dict[str, EnumSort] = {}
        for name, sort in observables:
            if not _IDENT_RE.match(name) or name in _RESERVED:
                raise ValueError(f"bad observable name {name!r}")
            if name in self._sorts:
                raise ValueError(f"duplicate observable {name!r}")
            self._sorts[name] = sort
            if isinstance(sort, EnumSort):
                for lab in sort.labels:
                    if lab in self._label_sorts:
                        raise ValueError(f"enum label {lab!r} used by two sorts")
                    self._label_sorts[lab] = sort
        for lab in self._label_sorts:
            if lab in self._sorts:
                raise ValueError(f"name {lab!r} is both observable and enum label")
        if not self._sorts:
            raise ValueError("signature needs at least one observable")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._sorts)

    def __contains__(self, name: str) -> bool:
        return name in self._sorts

    def sort_of(self, name: str) -> Sort:
        return self._sorts[name]

    def label_sort(self, label: str) -> Optional[EnumSort]:
        return self._label_sorts.get(label)

    def items(self):
        return self._sorts.items()

    def check_observation(self, obs: Mapping[str, Value]) -> None:
        """Raise ValueError unless ``obs`` is total and sort-conformant."""
        for name, sort in self._sorts.items():
            if name not in obs:
                raise ValueError(f"observation misses {name!r}")
            if not sort.contains(obs[name]):
                raise ValueError(f"value {obs[name]!r} not in sort of {name!r}")
        extra = set(obs) - set(self._sorts)
        if extra:
            raise ValueError(f"observation has unknown names {sorted(extra)}")


# ---------------------------------------------------------------------------
# Formula AST


@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class IntConst:
    value: int


@dataclass(frozen=True)
class EnumConst:
    label: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Arith:
    op: str  # + - *
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Cmp:
    op: str  # == != < <= > >=
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class BoolOp:
    op: str  # && || => <=>
    left: "Formula"
    right: "Formula"


Formula = Union[BoolConst, IntConst, EnumConst, Var, Arith, Cmp, Not, BoolOp]


def evaluate(phi: Formula, obs: Mapping[str, Value]) -> Value:
    """Value of ``phi`` under ``obs``; boolean for well-sorted formulas.

    Arithmetic is exact over the mathematical integers, so intermediate
    values may leave the declared sort bounds.
    """
    match phi:
        case BoolConst(value=v) | IntConst(value=v):
            return v
        case EnumConst(label=lab):
            return lab
        case Var(name=name):
            return obs[name]
        case Arith(op=op, left=l, right=r):
            a, b = evaluate(l, obs), evaluate(r, obs)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            return a * b
        case Cmp(op=op, left=l, right=r):
            a, b = evaluate(l, obs), evaluate(r, obs)
            if op == "==":
                return a == b
            if op == "!=":
                return a != b
            if op == "<":
                return a < b
            if op == "<=":
                return a <= b
            if op == ">":
                return a > b
            return a >= b
        case Not(arg=x):
            return not evaluate(x, obs)
        case BoolOp(op=op, left=l, right=r):
            if op == "&&":
                return evaluate(l, obs) and evaluate(r, obs)
            if op == "||":
                return evaluate(l, obs) or evaluate(r, obs)
            if op == "=>":
                return (not evaluate(l, obs)) or evaluate(r, obs)
            return bool(evaluate(l, obs)) == bool(evaluate(r, obs))
    raise TypeError(f"not a formula node: {phi!r}")


def free_observables(phi: Formula) -> frozenset[str]:
    """Names of the variables occurring in ``phi``."""
    out: set[str] = set()
    stack = [phi]
    while stack:
        node = stack.pop()
        match node:
            case Var(name=name):
                out.add(name)
            case Arith(left=l, right=r) | Cmp(left=l, right=r) | BoolOp(left=l, right=r):
                stack.append(l)
                stack.append(r)
            case Not(arg=x):
                stack.append(x)
            case _:
                pass
    return frozenset(out)


# ---------------------------------------------------------------------------
# Sort checking

_INT = "int"
_BOOL = "bool"
_LIT = "enumlit"  # enum literal whose sort is resolved by the comparison partner


def sort_check(phi: Formula, sig: Signature, positions=None, expect: str = _BOOL):
    """Check ``phi`` against ``sig``; raises a diagnostic on failure.

    ``expect`` is the required top-level type: "bool" for formulas, "int"
    for arithmetic update expressions.  ``positions`` optionally maps
    ``id(node)`` to a (line, col) pair so that parser-produced trees report
    source locations.
    """

    def where(node):
        if positions is not None:
            return positions.get(id(node), (None, None))
        return (None, None)

    def fail(cls, msg, node):
        line, col = where(node)
        raise cls(msg, line, col)

    def visit(node):
        match node:
            case BoolConst():
                return _BOOL
            case IntConst():
                return _INT
            case EnumConst(label=lab):
                if sig.label_sort(lab) is None:
                    fail(UnknownObservableError, f"unknown observable {lab!r}", node)
                return _LIT
            case Var(name=name):
                if name not in sig:
                    fail(UnknownObservableError, f"unknown observable {name!r}", node)
                sort = sig.sort_of(name)
                if isinstance(sort, BoundedInt):
                    return _INT
                if isinstance(sort, BoolSort):
                    return _BOOL
                return sort
            case Arith(op=op, left=l, right=r):
                for side in (l, r):
                    if visit(side) != _INT:
                        fail(SortMismatchError, f"operand of {op!r} is not an integer", side)
                return _INT
            case Cmp(op=op, left=l, right=r):
                tl, tr = visit(l), visit(r)
                if op in ("<", "<=", ">", ">="):
                    if tl != _INT or tr != _INT:
                        fail(SortMismatchError, f"{op!r} compares non-integers", node)
                    return _BOOL
                # == / != need both sides of one sort
                if tl == _LIT and tr == _LIT:
                    fail(SortMismatchError, "cannot infer the sort of two enum labels", node)
                if tl == _LIT:
                    tl, tr = tr, tl
                    l, r = r, l
                if tr == _LIT:
                    if not isinstance(tl, EnumSort):
                        fail(SortMismatchError, "enum label compared with non-enum", r)
                    if r.label not in tl.labels:
                        fail(SortMismatchError, f"label {r.label!r} not in {tl}", r)
                    return _BOOL
                if tl != tr:
                    fail(SortMismatchError, f"{op!r} compares different sorts", node)
                return _BOOL
            case Not(arg=x):
                if visit(x) != _BOOL:
                    fail(SortMismatchError, "negation of a non-boolean", x)
                return _BOOL
            case BoolOp(op=op, left=l, right=r):
                for side in (l, r):
                    if visit(side) != _BOOL:
                        fail(SortMismatchError, f"operand of {op!r} is not boolean", side)
                return _BOOL
        raise TypeError(f"not a formula node: {node!r}")

    if visit(phi) != expect:
        kind = "boolean" if expect == _BOOL else "an integer expression"
        fail(SortMismatchError, f"formula is not {kind}", phi)


# ---------------------------------------------------------------------------
# Tokenizer (shared with the model DSL)

_SYMBOLS = (
    "<=>", "==", "!=", "<=", ">=", "&&", "||", "=>", "->", ":=", "..",
    "(", ")", "{", "}", "[", "]", ",", ":", "+", "-", "*", "<", ">", "!", "=",
)


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, INT, SYM, EOF
    text: str
    line: int
    col: int


def tokenize(text: str, first_line: int = 1) -> list[Token]:
    """Split ``text`` into tokens; ``#`` starts a comment to end of line."""
    toks: list[Token] = []
    line, col = first_line, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            # digit-led words with letters or underscores are ids, not numbers
            toks.append(Token("INT" if word.isdigit() else "IDENT", word, line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(Token("IDENT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                toks.append(Token("SYM", sym, line, col))
                col += len(sym)
                i += len(sym)
                break
        else:
            raise FormulaSyntaxError(f"unexpected character {ch!r}", line, col)
    toks.append(Token("EOF", "", line, col))
    return toks


class FormulaParser:
    """Recursive-descent parser over a token list.

    Precedence, tightest first: ``!``, ``*``, ``+ -``, comparisons, ``&&``,
    ``||``, ``=>`` (right-associative), ``<=>``.
    """

    def __init__(self, tokens: list[Token], sig: Signature, pos: int = 0):
        self.toks = tokens
        self.sig = sig
        self.pos = pos
        self.positions: dict[int, tuple[int, int]] = {}

    def peek(self) -> Token:
        return self.toks[self.pos]

    def take(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise FormulaSyntaxError(msg, tok.line, tok.col)

    def _mark(self, node, tok: Token):
        self.positions[id(node)] = (tok.line, tok.col)
        return node

    def parse_expression(self) -> Formula:
        """Parse a formula starting at the current token, stopping where the
        grammar can no longer extend it."""
        return self._iff()

    def _iff(self):
        node = self._implies()
        while self.peek().text == "<=>":
            tok = self.take()
            node = self._mark(BoolOp("<=>", node, self._implies()), tok)
        return node

    def _implies(self):
        node = self._or()
        if self.peek().text == "=>":
            tok = self.take()
            node = self._mark(BoolOp("=>", node, self._implies()), tok)
        return node

    def _or(self):
        node = self._and()
        while self.peek().text == "||":
            tok = self.take()
            node = self._mark(BoolOp("||", node, self._and()), tok)
        return node

    def _and(self):
        node = self._cmp()
        while self.peek().text == "&&":
            tok = self.take()
            node = self._mark(BoolOp("&&", node, self._cmp()), tok)
        return node

    def _cmp(self):
        node = self._add()
        if self.peek().text in ("==", "!=", "<", "<=", ">", ">="):
            tok = self.take()
            node = self._mark(Cmp(tok.text, node, self._add()), tok)
        return node

    def _add(self):
        node = self._mul()
        while self.peek().text in ("+", "-"):
            tok = self.take()
            node = self._mark(Arith(tok.text, node, self._mul()), tok)
        return node

    def _mul(self):
        node = self._unary()
        while self.peek().text == "*":
            tok = self.take()
            node = self._mark(Arith("*", node, self._unary()), tok)
        return node

    def _unary(self):
        tok = self.peek()
        if tok.text == "!":
            self.take()
            return self._mark(Not(self._unary()), tok)
        return self._primary()

    def _primary(self):
        tok = self.take()
        if tok.kind == "INT":
            return self._mark(IntConst(int(tok.text)), tok)
        if tok.text == "(":
            node = self._iff()
            if self.peek().text != ")":
                self.error("expected ')'")
            self.take()
            return node
        if tok.kind == "IDENT":
            if tok.text == "true":
                return self._mark(BoolConst(True), tok)
            if tok.text == "false":
                return self._mark(BoolConst(False), tok)
            if tok.text in self.sig:
                return self._mark(Var(tok.text), tok)
            if self.sig.label_sort(tok.text) is not None:
                return self._mark(EnumConst(tok.text), tok)
            raise UnknownObservableError(
                f"unknown observable {tok.text!r}", tok.line, tok.col
            )
        self.error(f"unexpected {tok.text!r}", tok)


def parse_formula(text: str, sig: Signature, expect: str = _BOOL) -> Formula:
    """Parse and sort-check a formula over ``sig``.

    ``expect`` may be "int" to parse an arithmetic term instead of a boolean
    formula.  Raises FormulaSyntaxError, UnknownObservableError or
    SortMismatchError with line/column information.
    """
    parser = FormulaParser(tokenize(text), sig)
    node = parser.parse_expression()
    tok = parser.peek()
    if tok.kind != "EOF":
        parser.error(f"unexpected {tok.text!r} after formula", tok)
    sort_check(node, sig, parser.positions, expect=expect)
    return node


# ---------------------------------------------------------------------------
# Pretty printing

_PREC = {
    BoolOp: {"<=>": 1, "=>": 2, "||": 3, "&&": 4},
    Cmp: 5,
    Arith: {"+": 6, "-": 6, "*": 7},
    Not: 8,
}


def _prec(node) -> int:
    match node:
        case BoolOp(op=op):
            return _PREC[BoolOp][op]
        case Cmp():
            return 5
        case Arith(op=op):
            return _PREC[Arith][op]
        case Not():
            return 8
        case _:
            return 9


@lru_cache(maxsize=None)
def pretty(phi: Formula) -> str:
    """Render ``phi``; ``parse_formula(pretty(phi), sig) == phi``."""

    def wrap(child, limit):
        s = pretty(child)
        return f"({s})" if _prec(child) < limit else s

    match phi:
        case BoolConst(value=v):
            return "true" if v else "false"
        case IntConst(value=v):
            return str(v)
        case EnumConst(label=lab):
            return lab
        case Var(name=name):
            return name
        case Not(arg=x):
            return "!" + wrap(x, 9)
        case Arith(op=op, left=l, right=r):
            p = _prec(phi)
            return f"{wrap(l, p)} {op} {wrap(r, p + 1)}"
        case Cmp(op=op, left=l, right=r):
            return f"{wrap(l, 6)} {op} {wrap(r, 6)}"
        case BoolOp(op=op, left=l, right=r):
            p = _prec(phi)
            if op == "=>":  # right-associative
                return f"{wrap(l, p + 1)} {op} {wrap(r, p)}"
            return f"{wrap(l, p)} {op} {wrap(r, p + 1)}"
    raise TypeError(f"not a formula node: {phi!r}")
