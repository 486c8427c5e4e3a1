"""Shared test machinery: invariant suites and independent oracles.

The oracles deliberately use different algorithms than the package: the CTL
oracle evaluates temporal operators by forward graph search and dual
characterisations instead of backward fixpoints, and the flat-space oracle
re-derives reachability with direct formula evaluation and no caching or
canonicalisation.
"""

from __future__ import annotations

import random

from sbcheck.constraints import BoundedInt, Signature, evaluate, parse_formula
from sbcheck.ctl import (
    CtlAU,
    CtlAnd,
    CtlAtom,
    CtlEU,
    CtlEX,
    CtlFalse,
    CtlImplies,
    CtlNot,
    CtlOr,
    CtlTrue,
    af,
    ag,
    ax,
    ef,
    eg,
)
from sbcheck.flatten import AdaptPhase, FlatState, SteadyIn
from sbcheck.kripke import Kripke
from sbcheck.model import BLevel, BState, SBSystem, SLevel, STransition


# ---------------------------------------------------------------------------
# Flat-semantics invariant suite


def prop1_violations(sys, flat) -> list[str]:
    """Violations of the structural properties of the flat semantics."""
    out = []
    steady_edges = set()
    adapt_edges = set()
    for src, lab, dst in flat.transitions:
        if isinstance(lab, SteadyIn):
            steady_edges.add((src, dst))
            if not src.is_steady:
                out.append(f"(iii) steady transition out of adapting {src}")
            if not (dst.is_steady and dst.r == src.r == lab.r):
                out.append(f"(vi) steady transition changes structure state at {src}")
        else:
            adapt_edges.add((src, dst))
            ok_target = (dst.is_steady and dst.r == lab.target) or (
                not dst.is_steady and dst.r == src.r and dst.phase == (lab.inv, lab.target))
            if not ok_target:
                out.append(f"(vi) adaptation transition with foreign target at {src}")
    overlap = steady_edges & adapt_edges
    if overlap:
        out.append(f"(iv) families overlap on {sorted(map(str, overlap))[:3]}")
    for f in flat.states:
        labs = [lab for lab, _ in flat.successors(f)]
        has_steady = any(isinstance(l, SteadyIn) for l in labs)
        has_adapt = any(isinstance(l, AdaptPhase) for l in labs)
        if f.is_steady and has_steady and has_adapt:
            out.append(f"(i/ii) steady state {f} both continues and adapts")
        if f.is_steady and not sys.sat(f.q, sys.s.label(f.r)):
            out.append(f"(vii) reachable steady state {f} violates its constraints")
        if not f.is_steady:
            targets = [g for _, g in flat.successors(f)]
            ends = [g for g in targets if g.is_steady]
            mids = [g for g in targets if not g.is_steady]
            if ends and mids:
                out.append(f"(v) {f} keeps adapting although the phase can end")
    bound = (len(sys.b.states)
             * (1 + len(sys.s.transitions))
             * len(sys.s.states))
    if flat.n_states > bound:
        out.append(f"size bound violated: {flat.n_states} > {bound}")
    return out


def oracle_flat_size(sys, root=None) -> tuple[int, int]:
    """Reachable flat state and edge counts, re-derived without the package's
    successor function, caches or orderings."""
    b, s = sys.b, sys.s

    def holds(q, phi):
        return bool(evaluate(phi, b.states[q].obs))

    f0 = (root or (b.initial, s.initial)) + (None,)
    seen = {f0}
    stack = [f0]
    n_edges = 0
    while stack:
        q, r, ph = stack.pop()
        nxt = set()
        if ph is None:
            if holds(q, s.label(r)):
                good = [q2 for q2 in b.successors(q) if holds(q2, s.label(r))]
                if good:
                    nxt.update((q2, r, None) for q2 in good)
                elif b.successors(q):
                    for tr in s.transitions_from(r):
                        for q2 in b.successors(q):
                            if holds(q2, s.label(tr.target)):
                                nxt.add((q2, tr.target, None))
                            elif holds(q2, tr.inv):
                                nxt.add((q2, r, (tr.inv, tr.target)))
        else:
            inv, target = ph
            if holds(q, inv) and not holds(q, s.label(target)):
                ends = [q2 for q2 in b.successors(q) if holds(q2, s.label(target))]
                if ends:
                    nxt.update((q2, target, None) for q2 in ends)
                else:
                    nxt.update((q2, r, ph)
                               for q2 in b.successors(q) if holds(q2, inv))
        n_edges += len(nxt)
        for g in nxt:
            if g not in seen:
                seen.add(g)
                stack.append(g)
    return len(seen), n_edges


# ---------------------------------------------------------------------------
# Random Kripke structures and CTL formulas


def random_kripke(rng: random.Random, n_states: int, out_degree: int = 3) -> Kripke:
    states = tuple(FlatState(f"s{i}", "r0", None) for i in range(n_states))
    succ = []
    looped = set()
    for i in range(n_states):
        k = rng.randint(0, out_degree)
        targets = sorted({rng.randrange(n_states) for _ in range(k)})
        if not targets:
            targets = [i]
            looped.add(i)
        succ.append(tuple(targets))
    labels = [frozenset(p for p in ("adapting", "steady", "progress")
                        if rng.random() < 0.4)
              for _ in range(n_states)]
    return Kripke(states, 0, succ, labels, frozenset(looped))


def random_ctl(rng: random.Random, depth: int):
    if depth <= 0:
        return rng.choice([CtlTrue(), CtlFalse(), CtlAtom("adapting"),
                           CtlAtom("steady"), CtlAtom("progress")])
    pick = rng.randrange(12)
    sub = lambda: random_ctl(rng, depth - 1)
    if pick == 0:
        return CtlNot(sub())
    if pick == 1:
        return CtlAnd(sub(), sub())
    if pick == 2:
        return CtlOr(sub(), sub())
    if pick == 3:
        return CtlImplies(sub(), sub())
    if pick == 4:
        return CtlEX(sub())
    if pick == 5:
        return ax(sub())
    if pick == 6:
        return ef(sub())
    if pick == 7:
        return af(sub())
    if pick == 8:
        return eg(sub())
    if pick == 9:
        return ag(sub())
    if pick == 10:
        return CtlEU(sub(), sub())
    return CtlAU(sub(), sub())


def oracle_sat(k: Kripke, phi) -> frozenset[int]:
    """CTL satisfaction by forward search and dual characterisations."""
    everything = frozenset(range(k.n_states))

    def forward_eu(sat_a, sat_b):
        # exists a path through sat_a states reaching sat_b
        out = set()
        for t in range(k.n_states):
            if t in sat_b:
                out.add(t)
                continue
            if t not in sat_a:
                continue
            seen = {t}
            stack = [t]
            hit = False
            while stack and not hit:
                x = stack.pop()
                for y in k.succ[x]:
                    if y in sat_b:
                        hit = True
                        break
                    if y in sat_a and y not in seen:
                        seen.add(y)
                        stack.append(y)
            if hit:
                out.add(t)
        return frozenset(out)

    def cycle_states(region):
        # nodes on a cycle of the subgraph induced by ``region``
        cyc = set()
        color = {}
        for start in region:
            if color.get(start):
                continue
            stack = [(start, iter([y for y in k.succ[start] if y in region]))]
            color[start] = 1
            path = [start]
            while stack:
                v, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    color[v] = 2
                    stack.pop()
                    path.pop()
                    continue
                if color.get(nxt) == 1:
                    cyc.update(path[path.index(nxt):])
                elif not color.get(nxt):
                    color[nxt] = 1
                    stack.append((nxt, iter([y for y in k.succ[nxt] if y in region])))
                    path.append(nxt)
        return cyc

    def forward_eg(sat_a):
        cyc = cycle_states(sat_a)
        return forward_eu(sat_a, frozenset(cyc) & sat_a)

    match phi:
        case CtlTrue():
            return everything
        case CtlFalse():
            return frozenset()
        case CtlAtom(name=name):
            return frozenset(t for t in everything if name in k.labels[t])
        case CtlNot(arg=x):
            return everything - oracle_sat(k, x)
        case CtlAnd(left=l, right=r):
            return oracle_sat(k, l) & oracle_sat(k, r)
        case CtlOr(left=l, right=r):
            return oracle_sat(k, l) | oracle_sat(k, r)
        case CtlImplies(left=l, right=r):
            return (everything - oracle_sat(k, l)) | oracle_sat(k, r)
        case CtlEX(arg=x):
            target = oracle_sat(k, x)
            return frozenset(t for t in everything
                             if any(y in target for y in k.succ[t]))
        case CtlEU(left=l, right=r):
            return forward_eu(oracle_sat(k, l), oracle_sat(k, r))
        case CtlAU(left=l, right=r):
            # fails where a not-b path reaches (not-a and not-b) or loops in not-b
            sat_a, sat_b = oracle_sat(k, l), oracle_sat(k, r)
            not_b = everything - sat_b
            bad = forward_eu(not_b, not_b - sat_a) | forward_eg(not_b)
            return everything - bad
    raise TypeError(f"not a CTL node: {phi!r}")


# ---------------------------------------------------------------------------
# Deterministic system families


def single_loop_system() -> SBSystem:
    sig = Signature([("x", BoundedInt(0, 1))])
    b = BLevel([BState("q0", {"x": 0})], "q0", [("q0", "q0")])
    s = SLevel([("r0", parse_formula("x == 0", sig))], "r0", [])
    return SBSystem("loop", sig, b, s)


def corridor_system(n_blocks: int, seed: int = 0) -> SBSystem:
    """Ring of steady corridors separated by adaptation gaps.

    Flat size grows linearly in ``n_blocks``: one block contributes 100
    behaviour states (two 40-state corridors and two 10-state gaps).
    """
    rng = random.Random(seed)
    sig = Signature([("x", BoundedInt(0, 2))])
    corridor, gap = 40, 10
    xs = ([0] * corridor + [2] * gap + [1] * corridor + [2] * gap) * n_blocks
    n = len(xs)
    states = [BState(f"s{i}", {"x": xs[i]}) for i in range(n)]
    trans = []
    for i in range(n):
        trans.append((f"s{i}", f"s{(i + 1) % n}"))
        for off in (2, 3, 4, 6, 8):
            j = (i + off) % n
            if xs[j] == xs[i]:
                trans.append((f"s{i}", f"s{j}"))
        j = (i + rng.randint(1, 9)) % n
        if xs[j] == xs[i]:
            trans.append((f"s{i}", f"s{j}"))
    b = BLevel(states, "s0", trans)
    s = SLevel(
        [("r0", parse_formula("x == 0", sig)),
         ("r1", parse_formula("x == 1", sig))],
        "r0",
        [STransition("r0", parse_formula("true", sig), "r1"),
         STransition("r1", parse_formula("true", sig), "r0")],
    )
    return SBSystem(f"corridor{n_blocks}", sig, b, s)


def acceptance_schedule(seed: int) -> tuple[int, int, float]:
    """Generator parameters for one acceptance seed, fixed for all time."""
    prng = random.Random(seed * 7919 + 17)
    return prng.randint(1, 12), prng.randint(1, 4), prng.uniform(0.05, 1.0)
