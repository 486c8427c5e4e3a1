"""Weak and strong adaptability, decided two independent ways.

The logical route model-checks two fixed CTL formulas on the derived Kripke
structure:

    weak:   EG((adapting => EF steady) && progress)
    strong: AG((adapting => AF steady) && progress)

The relational route builds adaptation relations over behaviour/structure
state pairs directly from the flat semantics:

* a weak adaptation relation requires each related pair to progress, to have
  some related steady successor when steady moves exist, and to complete some
  adaptation phase on a related pair when adaptation can start;
* a strong adaptation relation requires all steady successors related and
  every adaptation phase to terminate, on related pairs only.

``weak_relation`` and ``greatest_strong_relation`` compute the largest such
relations coinductively, by deleting violating pairs from the satisfaction
grid until a fixpoint; ``strong_relation`` instead checks the projection of
the reachable steady states, which carries strong adaptability of the whole
system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Optional

from .ctl import (
    CtlAtom,
    CtlNot,
    CtlWitnessError,
    counterexample_ag,
    parse_ctl,
    sat_set,
    witness_eg,
)
from .flatten import AdaptPhase, FlatState, SteadyIn, build_flat, flat_successors
from .kripke import Kripke, to_kripke
from .model import SBSystem

WEAK_FORMULA = parse_ctl("EG((adapting => EF steady) && progress)")
STRONG_FORMULA = parse_ctl("AG((adapting => AF steady) && progress)")
WEAK_INNER = parse_ctl("(adapting => EF steady) && progress")
STRONG_INNER = parse_ctl("(adapting => AF steady) && progress")


class PreconditionError(Exception):
    """A state-level query was asked outside its precondition."""


Pair = tuple[str, str]


@dataclass(frozen=True)
class AdaptRelation:
    """A set of (behaviour state, structure state) pairs."""

    pairs: frozenset[Pair]

    def __contains__(self, pair: Pair) -> bool:
        return pair in self.pairs

    def __iter__(self):
        return iter(sorted(self.pairs))

    def __len__(self):
        return len(self.pairs)

    @staticmethod
    def of(pairs: Iterable[Pair]) -> "AdaptRelation":
        return AdaptRelation(frozenset(pairs))


@dataclass(frozen=True)
class Violation:
    pair: Pair
    clause: str  # "i" | "ii" | "iii"
    message: str

    def __str__(self):
        return f"({self.pair[0]}, {self.pair[1]}) clause ({self.clause}): {self.message}"


@dataclass(frozen=True)
class RelationCheck:
    ok: bool
    violations: tuple[Violation, ...]


@dataclass(frozen=True)
class Evidence:
    """A run supporting a verdict: a lasso, or a plain path when cycle is empty."""

    prefix: tuple[FlatState, ...]
    cycle: tuple[FlatState, ...]

    def states(self):
        return self.prefix + self.cycle


@dataclass(frozen=True)
class Verdict:
    holds: bool
    evidence: Evidence
    relation: Optional[AdaptRelation] = None


# ---------------------------------------------------------------------------
# Flat-semantics analysis shared by the relational checks


@dataclass(frozen=True)
class _PhaseFacts:
    label: str                      # for violation messages
    endpoints: frozenset[Pair]      # steady pairs completed phases land on
    has_dead: bool                  # a successor-free adapting state is reachable
    has_cycle: bool                 # the phase subgraph has a cycle


@dataclass(frozen=True)
class _PairFacts:
    progress: bool
    steady_pairs: frozenset[Pair]
    phases: tuple[_PhaseFacts, ...]

    @property
    def has_steady(self) -> bool:
        return bool(self.steady_pairs)

    @property
    def has_adapt(self) -> bool:
        return bool(self.phases)

    @property
    def weak_endpoints(self) -> frozenset[Pair]:
        out: frozenset[Pair] = frozenset()
        for ph in self.phases:
            out |= ph.endpoints
        return out


class _Analysis:
    """Per-system cache of flat successors and phase summaries."""

    def __init__(self, sys: SBSystem):
        self.sys = sys
        self._succ: dict[FlatState, list] = {}

    def successors(self, f: FlatState):
        hit = self._succ.get(f)
        if hit is None:
            hit = flat_successors(self.sys, f)
            self._succ[f] = hit
        return hit

    def _explore_phase(self, entries):
        """Endpoints, dead-state and cycle facts of the adapting subgraph
        reachable from ``entries``."""
        endpoints: set[Pair] = set()
        has_dead = False
        edges: dict[FlatState, list[FlatState]] = {}
        stack = list(entries)
        nodes = set(entries)
        while stack:
            x = stack.pop()
            succs = self.successors(x)
            if not succs:
                has_dead = True
            mids = []
            for _lab, y in succs:
                if y.is_steady:
                    endpoints.add((y.q, y.r))
                else:
                    mids.append(y)
                    if y not in nodes:
                        nodes.add(y)
                        stack.append(y)
            edges[x] = mids
        return frozenset(endpoints), has_dead, _has_cycle(nodes, edges)

    def facts(self, q: str, r: str) -> _PairFacts:
        f = FlatState(q, r, None)
        succs = self.successors(f)
        steady_pairs = frozenset(
            (y.q, y.r) for lab, y in succs if isinstance(lab, SteadyIn))
        groups: dict[tuple, dict] = {}
        for lab, y in succs:
            if not isinstance(lab, AdaptPhase):
                continue
            g = groups.setdefault((lab.inv, lab.target),
                                  {"ends": set(), "entries": []})
            if y.is_steady:
                g["ends"].add((y.q, y.r))
            else:
                g["entries"].append(y)
        phases = []
        for (inv, target), g in groups.items():
            ends, dead, cyc = self._explore_phase(g["entries"])
            phases.append(_PhaseFacts(
                label=f"{r} -> {target}",
                endpoints=frozenset(g["ends"]) | ends,
                has_dead=dead,
                has_cycle=cyc,
            ))
        return _PairFacts(
            progress=bool(succs),
            steady_pairs=steady_pairs,
            phases=tuple(phases),
        )


def _has_cycle(nodes, edges) -> bool:
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}
    for start in nodes:
        if color[start] != WHITE:
            continue
        color[start] = GRAY
        stack = [(start, iter(edges[start]))]
        while stack:
            v, it = stack[-1]
            advanced = False
            for y in it:
                if color[y] == GRAY:
                    return True
                if color[y] == WHITE:
                    color[y] = GRAY
                    stack.append((y, iter(edges[y])))
                    advanced = True
                    break
            if not advanced:
                color[v] = BLACK
                stack.pop()
    return False


def _grid_facts(sys: SBSystem):
    """Facts for every satisfaction-grid pair (q satisfies the label of r)."""
    an = _Analysis(sys)
    facts: dict[Pair, _PairFacts] = {}
    for q in sys.b.states:
        for r in sys.s.states:
            if sys.sat(q, sys.s.label(r)):
                facts[(q, r)] = an.facts(q, r)
    return facts


# ---------------------------------------------------------------------------
# Relation construction


def weak_relation(sys: SBSystem) -> AdaptRelation:
    """Greatest weak adaptation relation over the whole state grid.

    Starts from every pair whose behaviour state satisfies the structure
    constraints and can progress, then deletes pairs whose steady moves all
    leave the relation or whose adaptation phases never complete on a related
    pair, until nothing changes.
    """
    facts = _grid_facts(sys)
    cand = {pair for pair, pf in facts.items() if pf.progress}
    changed = True
    while changed:
        changed = False
        for pair in sorted(cand):
            pf = facts[pair]
            if pf.has_steady and not (pf.steady_pairs & cand):
                cand.discard(pair)
                changed = True
            elif pf.has_adapt and not (pf.weak_endpoints & cand):
                cand.discard(pair)
                changed = True
    return AdaptRelation(frozenset(cand))


def greatest_strong_relation(sys: SBSystem) -> AdaptRelation:
    """Greatest strong adaptation relation over the whole state grid."""
    facts = _grid_facts(sys)
    cand = {pair for pair, pf in facts.items() if pf.progress}
    changed = True
    while changed:
        changed = False
        for pair in sorted(cand):
            pf = facts[pair]
            bad = (pf.has_steady and not (pf.steady_pairs <= cand)) or any(
                ph.has_dead or ph.has_cycle or not (ph.endpoints <= cand)
                for ph in pf.phases)
            if bad:
                cand.discard(pair)
                changed = True
    return AdaptRelation(frozenset(cand))


def strong_relation(sys: SBSystem) -> Optional[AdaptRelation]:
    """The reachable-steady-pairs candidate, if it is a strong adaptation.

    The candidate is the projection of the steady states reachable in the
    flat semantics; it is a strong adaptation relation exactly when the
    system is strong adaptable, so the result is absent otherwise.
    """
    flat = build_flat(sys)
    candidate = AdaptRelation(flat.steady_pairs())
    return candidate if is_strong_adaptation(sys, candidate).ok else None


# ---------------------------------------------------------------------------
# Relation verification


def _check_ids(sys: SBSystem, rel: AdaptRelation):
    for q, r in rel.pairs:
        if q not in sys.b.states:
            raise ValueError(f"unknown behaviour state {q!r} in relation")
        if r not in sys.s.states:
            raise ValueError(f"unknown structure state {r!r} in relation")


def is_weak_adaptation(sys: SBSystem, rel: AdaptRelation) -> RelationCheck:
    """Check the weak adaptation clauses for every pair of ``rel``."""
    _check_ids(sys, rel)
    an = _Analysis(sys)
    violations: list[Violation] = []
    for q, r in sorted(rel.pairs):
        if not sys.sat(q, sys.s.label(r)):
            violations.append(Violation((q, r), "i", "constraints not satisfied"))
            continue
        pf = an.facts(q, r)
        if not pf.progress:
            violations.append(Violation((q, r), "i", "no flat successor (progress fails)"))
            continue
        if pf.has_steady and not (pf.steady_pairs & rel.pairs):
            violations.append(Violation(
                (q, r), "ii", "no steady successor lands on a related pair"))
        if pf.has_adapt and not (pf.weak_endpoints & rel.pairs):
            violations.append(Violation(
                (q, r), "iii", "no adaptation phase completes on a related pair"))
    return RelationCheck(not violations, tuple(violations))


def is_strong_adaptation(sys: SBSystem, rel: AdaptRelation) -> RelationCheck:
    """Check the strong adaptation clauses for every pair of ``rel``."""
    _check_ids(sys, rel)
    an = _Analysis(sys)
    violations: list[Violation] = []
    for q, r in sorted(rel.pairs):
        if not sys.sat(q, sys.s.label(r)):
            violations.append(Violation((q, r), "i", "constraints not satisfied"))
            continue
        pf = an.facts(q, r)
        if not pf.progress:
            violations.append(Violation((q, r), "i", "no flat successor (progress fails)"))
            continue
        missing = pf.steady_pairs - rel.pairs
        if missing:
            violations.append(Violation(
                (q, r), "ii", f"steady successors {sorted(missing)} unrelated"))
        for ph in pf.phases:
            if ph.has_dead:
                violations.append(Violation(
                    (q, r), "iii", f"phase {ph.label} can dead-end while adapting"))
            if ph.has_cycle:
                violations.append(Violation(
                    (q, r), "iii", f"phase {ph.label} admits an infinite adaptation path"))
            missing = ph.endpoints - rel.pairs
            if missing:
                violations.append(Violation(
                    (q, r), "iii", f"phase {ph.label} ends on unrelated pairs {sorted(missing)}"))
    return RelationCheck(not violations, tuple(violations))


# ---------------------------------------------------------------------------
# CTL-side verdicts


def _as_states(k: Kripke, indices) -> tuple[FlatState, ...]:
    return tuple(k.states[i] for i in indices)


def _failing_evidence(k: Kripke, inner, t0: int) -> Evidence:
    """A run from ``t0`` showing how the checked property degenerates.

    Prefers a shortest path to a dead state (a progress violation, reported
    with its self-loop); otherwise takes a shortest path to a state violating
    the inner formula and, when that violation is a broken eventuality,
    extends the run with a never-steady lasso.  Either way the reported run
    ends in a dead state's self-loop or an adapting cycle.
    """
    try:
        path = list(counterexample_ag(k, CtlAtom("progress"), t0))
        return Evidence(_as_states(k, path[:-1]), (k.states[path[-1]],))
    except CtlWitnessError:
        pass
    path = list(counterexample_ag(k, inner, t0))
    v = path[-1]
    try:
        lasso = witness_eg(k, CtlNot(CtlAtom("steady")), v)
    except CtlWitnessError:
        return Evidence(_as_states(k, path), ())
    return Evidence(_as_states(k, path[:-1] + list(lasso.prefix)),
                    _as_states(k, lasso.cycle))


def check_weak(sys: SBSystem) -> Verdict:
    """Whether the system is weak adaptable, with a witness or counterexample."""
    k = to_kripke(build_flat(sys))
    holds = k.initial in sat_set(k, WEAK_FORMULA)
    if holds:
        lasso = witness_eg(k, WEAK_INNER, k.initial)
        evidence = Evidence(_as_states(k, lasso.prefix), _as_states(k, lasso.cycle))
    else:
        evidence = _failing_evidence(k, WEAK_INNER, k.initial)
    return Verdict(holds, evidence)


def check_strong(sys: SBSystem) -> Verdict:
    """Whether the system is strong adaptable, with supporting evidence."""
    k = to_kripke(build_flat(sys))
    holds = k.initial in sat_set(k, STRONG_FORMULA)
    if holds:
        # a sample run; AG makes every run good, EG of the inner then holds
        lasso = witness_eg(k, STRONG_INNER, k.initial)
        evidence = Evidence(_as_states(k, lasso.prefix), _as_states(k, lasso.cycle))
    else:
        evidence = _failing_evidence(k, STRONG_INNER, k.initial)
    return Verdict(holds, evidence)


def state_adaptable(sys: SBSystem, q: str, r: str,
                    mode: Literal["weak", "strong"]) -> bool:
    """Per-state adaptability by the CTL route, seeded at (q, r, {}).

    The flat semantics is rebuilt from that steady state, so the query works
    for pairs unreachable from the initial state.  Requires q to satisfy the
    constraints of r.
    """
    if mode not in ("weak", "strong"):
        raise ValueError(f"unknown mode {mode!r}")
    if q not in sys.b.states or r not in sys.s.states:
        raise PreconditionError(f"unknown state pair ({q!r}, {r!r})")
    if not sys.sat(q, sys.s.label(r)):
        raise PreconditionError(
            f"behaviour state {q!r} does not satisfy the constraints of {r!r}")
    k = to_kripke(build_flat(sys, root=(q, r)))
    phi = WEAK_FORMULA if mode == "weak" else STRONG_FORMULA
    return k.initial in sat_set(k, phi)
