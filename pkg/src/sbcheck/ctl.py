"""Explicit-state CTL model checking over Kripke structures.

The core connectives are true, false, atoms, the boolean operators, EX and
the two until operators.  The remaining temporal operators are expanded at
parse time:

    EF p = E[true U p]      AF p = A[true U p]
    EG p = !AF !p           AG p = !EF !p          AX p = !EX !p

Satisfaction sets are computed bottom-up; the until operators by least
fixpoints over the predecessor relation, each pass linear in states plus
edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .kripke import AP, Kripke


class CtlError(Exception):
    pass


class CtlParseError(CtlError):
    pass


class CtlWitnessError(CtlError):
    """Raised when a witness or counterexample precondition does not hold."""


@dataclass(frozen=True)
class CtlTrue:
    pass


@dataclass(frozen=True)
class CtlFalse:
    pass


@dataclass(frozen=True)
class CtlAtom:
    name: str


@dataclass(frozen=True)
class CtlNot:
    arg: "CtlFormula"


@dataclass(frozen=True)
class CtlAnd:
    left: "CtlFormula"
    right: "CtlFormula"


@dataclass(frozen=True)
class CtlOr:
    left: "CtlFormula"
    right: "CtlFormula"


@dataclass(frozen=True)
class CtlImplies:
    left: "CtlFormula"
    right: "CtlFormula"


@dataclass(frozen=True)
class CtlEX:
    arg: "CtlFormula"


@dataclass(frozen=True)
class CtlEU:
    left: "CtlFormula"
    right: "CtlFormula"


@dataclass(frozen=True)
class CtlAU:
    left: "CtlFormula"
    right: "CtlFormula"


CtlFormula = Union[CtlTrue, CtlFalse, CtlAtom, CtlNot, CtlAnd, CtlOr,
                   CtlImplies, CtlEX, CtlEU, CtlAU]


def ef(phi: CtlFormula) -> CtlFormula:
    return CtlEU(CtlTrue(), phi)


def af(phi: CtlFormula) -> CtlFormula:
    return CtlAU(CtlTrue(), phi)


def eg(phi: CtlFormula) -> CtlFormula:
    return CtlNot(af(CtlNot(phi)))


def ag(phi: CtlFormula) -> CtlFormula:
    return CtlNot(ef(CtlNot(phi)))


def ax(phi: CtlFormula) -> CtlFormula:
    return CtlNot(CtlEX(CtlNot(phi)))


# ---------------------------------------------------------------------------
# Parser

_UNARY = {"EX": CtlEX, "AX": ax, "EF": ef, "AF": af, "EG": eg, "AG": ag}


class _CtlParser:
    def __init__(self, text: str):
        self.toks = self._lex(text)
        self.pos = 0

    @staticmethod
    def _lex(text: str) -> list[str]:
        toks = []
        i, n = 0, len(text)
        while i < n:
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch.isalpha():
                j = i
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                toks.append(text[i:j])
                i = j
                continue
            for sym in ("&&", "||", "=>", "(", ")", "[", "]", "!"):
                if text.startswith(sym, i):
                    toks.append(sym)
                    i += len(sym)
                    break
            else:
                raise CtlParseError(f"unexpected character {ch!r} at offset {i}")
        toks.append("")
        return toks

    def peek(self) -> str:
        return self.toks[self.pos]

    def take(self) -> str:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str):
        tok = self.take()
        if tok != text:
            raise CtlParseError(f"expected {text!r}, found {tok!r}")

    def parse(self) -> CtlFormula:
        node = self._implies()
        if self.peek() != "":
            raise CtlParseError(f"unexpected {self.peek()!r} after formula")
        return node

    def _implies(self):
        node = self._or()
        if self.peek() == "=>":
            self.take()
            return CtlImplies(node, self._implies())
        return node

    def _or(self):
        node = self._and()
        while self.peek() == "||":
            self.take()
            node = CtlOr(node, self._and())
        return node

    def _and(self):
        node = self._unary()
        while self.peek() == "&&":
            self.take()
            node = CtlAnd(node, self._unary())
        return node

    def _unary(self):
        tok = self.peek()
        if tok == "!":
            self.take()
            return CtlNot(self._unary())
        if tok in _UNARY:
            self.take()
            return _UNARY[tok](self._unary())
        if tok in ("E", "A"):
            self.take()
            self.expect("[")
            left = self._implies()
            self.expect("U")
            right = self._implies()
            self.expect("]")
            return CtlEU(left, right) if tok == "E" else CtlAU(left, right)
        return self._primary()

    def _primary(self):
        tok = self.take()
        if tok == "(":
            node = self._implies()
            self.expect(")")
            return node
        if tok == "true":
            return CtlTrue()
        if tok == "false":
            return CtlFalse()
        if tok in AP:
            return CtlAtom(tok)
        if tok == "":
            raise CtlParseError("unexpected end of formula")
        raise CtlParseError(f"unknown atom {tok!r}")


def parse_ctl(text: str) -> CtlFormula:
    """Parse a CTL formula over the atoms adapting, steady and progress."""
    return _CtlParser(text).parse()


# ---------------------------------------------------------------------------
# Satisfaction sets


def sat_set(k: Kripke, phi: CtlFormula) -> frozenset[int]:
    """Indices of the states satisfying ``phi``, computed bottom-up."""
    memo: dict[CtlFormula, frozenset[int]] = {}
    everything = frozenset(range(k.n_states))

    def visit(node: CtlFormula) -> frozenset[int]:
        hit = memo.get(node)
        if hit is not None:
            return hit
        match node:
            case CtlTrue():
                res = everything
            case CtlFalse():
                res = frozenset()
            case CtlAtom(name=name):
                res = frozenset(t for t in everything if name in k.labels[t])
            case CtlNot(arg=x):
                res = everything - visit(x)
            case CtlAnd(left=l, right=r):
                res = visit(l) & visit(r)
            case CtlOr(left=l, right=r):
                res = visit(l) | visit(r)
            case CtlImplies(left=l, right=r):
                res = (everything - visit(l)) | visit(r)
            case CtlEX(arg=x):
                target = visit(x)
                succ = k.succ
                res = frozenset(t for t in everything
                                if any(y in target for y in succ[t]))
            case CtlEU(left=l, right=r):
                res = _eu(k, visit(l), visit(r))
            case CtlAU(left=l, right=r):
                res = _au(k, visit(l), visit(r))
            case _:
                raise TypeError(f"not a CTL node: {node!r}")
        memo[node] = res
        return res

    return visit(phi)


def _eu(k: Kripke, sat_a: frozenset[int], sat_b: frozenset[int]) -> frozenset[int]:
    result = set(sat_b)
    stack = list(sat_b)
    pred = k.pred
    while stack:
        y = stack.pop()
        for x in pred[y]:
            if x not in result and x in sat_a:
                result.add(x)
                stack.append(x)
    return frozenset(result)


def _au(k: Kripke, sat_a: frozenset[int], sat_b: frozenset[int]) -> frozenset[int]:
    # count successors still able to avoid the result set
    remaining = [len(ts) for ts in k.succ]
    result = set(sat_b)
    stack = list(sat_b)
    pred = k.pred
    while stack:
        y = stack.pop()
        for x in pred[y]:
            remaining[x] -= 1
            if remaining[x] == 0 and x in sat_a and x not in result:
                result.add(x)
                stack.append(x)
    return frozenset(result)


def holds_at(k: Kripke, phi: CtlFormula, t: int) -> bool:
    """Whether state index ``t`` satisfies ``phi``."""
    return t in sat_set(k, phi)


# ---------------------------------------------------------------------------
# Witnesses and counterexamples


@dataclass(frozen=True)
class Lasso:
    """A run shaped as a finite prefix followed by a repeated cycle."""

    prefix: tuple[int, ...]
    cycle: tuple[int, ...]

    def states(self):
        return self.prefix + self.cycle


def _bfs_nearest(k: Kripke, start: int, goal, allowed=None) -> list[int] | None:
    """Shortest path from ``start`` to a goal state, lowest index tie-break.

    ``allowed`` optionally restricts the explored states.  The start state
    itself is a candidate when it satisfies the goal.
    """
    if allowed is not None and start not in allowed:
        return None
    parent = {start: None}
    frontier = [start]
    while frontier:
        hits = sorted(t for t in frontier if goal(t))
        if hits:
            path = [hits[0]]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return list(reversed(path))
        nxt = []
        for t in sorted(frontier):
            for y in k.succ[t]:
                if y in parent or (allowed is not None and y not in allowed):
                    continue
                parent[y] = t
                nxt.append(y)
        frontier = nxt
    return None


def witness_eg(k: Kripke, inner: CtlFormula, t: int) -> Lasso:
    """A lasso from ``t`` whose states all satisfy ``inner``.

    Requires ``t`` to satisfy EG inner; the lasso stays inside the set where
    EG inner holds, taking a shortest prefix to the nearest cycle, ties broken
    by state index.
    """
    good = sat_set(k, eg(inner))
    if t not in good:
        raise CtlWitnessError("state does not satisfy EG of the given formula")

    # cycle states inside the EG region, restricted to what t can reach
    reach = {t}
    stack = [t]
    while stack:
        x = stack.pop()
        for y in k.succ[x]:
            if y in good and y not in reach:
                reach.add(y)
                stack.append(y)
    cyc = _cycle_states(k, reach)

    prefix_path = _bfs_nearest(k, t, lambda s: s in cyc, allowed=reach)
    if prefix_path is None:  # cannot happen: every good state has a good successor
        raise CtlWitnessError("no cycle reachable inside the EG region")
    head = prefix_path[-1]
    best = None
    for y in sorted(k.succ[head]):
        if y not in reach:
            continue
        back = _bfs_nearest(k, y, lambda s: s == head, allowed=reach)
        if back is not None and (best is None or len(back) < len(best)):
            best = back
    assert best is not None
    cycle = [head] + best[:-1]
    return Lasso(tuple(prefix_path[:-1]), tuple(cycle))


def _cycle_states(k: Kripke, region: set[int]) -> set[int]:
    """States of ``region`` lying on a cycle of the induced subgraph."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    counter = [0]
    cyc: set[int] = set()

    def strongconnect(v0: int):
        work = [(v0, iter([y for y in k.succ[v0] if y in region]))]
        index[v0] = low[v0] = counter[0]
        counter[0] += 1
        stack.append(v0)
        on_stack.add(v0)
        while work:
            v, it = work[-1]
            advanced = False
            for y in it:
                if y not in index:
                    index[y] = low[y] = counter[0]
                    counter[0] += 1
                    stack.append(y)
                    on_stack.add(y)
                    work.append((y, iter([z for z in k.succ[y] if z in region])))
                    advanced = True
                    break
                if y in on_stack:
                    low[v] = min(low[v], index[y])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1 or (comp and comp[0] in k.succ[comp[0]]):
                    cyc.update(comp)

    for v in region:
        if v not in index:
            strongconnect(v)
    return cyc


def counterexample_ag(k: Kripke, inner: CtlFormula, t: int) -> tuple[int, ...]:
    """Shortest path from ``t`` to a state violating ``inner``.

    Requires AG inner to fail at ``t``; ties between equally near violations
    break on the state index.
    """
    bad = frozenset(range(k.n_states)) - sat_set(k, inner)
    path = _bfs_nearest(k, t, lambda s: s in bad)
    if path is None:
        raise CtlWitnessError("AG of the given formula holds; no counterexample")
    return tuple(path)
