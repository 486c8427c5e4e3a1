"""Command-line front end and the seeded random system generator.

Exit codes: 0 when the checked property holds (or the command just
succeeds), 1 when it fails, 2 for usage, parse or validation errors.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys as _sys

from . import adapt, flatten, kripke
from .constraints import BoolSort, BoundedInt, EnumSort, FormulaError, Signature, parse_formula, pretty
from .ctl import CtlError, parse_ctl, sat_set
from .model import (
    BLevel,
    BState,
    ModelError,
    SBSystem,
    SLevel,
    STransition,
    load_model,
    validate,
)


class GenerationError(Exception):
    pass


# ---------------------------------------------------------------------------
# Random system generation

_LABEL_WIDTH = 3


def gen_random(seed: int, n_b: int, n_s: int, density: float) -> SBSystem:
    """A validate-passing random system, deterministic in ``seed``.

    One integer observable; structure labels partition its range into
    ``n_s`` consecutive intervals; behaviour transitions are drawn
    independently with probability ``density``; the initial observation is
    redrawn inside the initial structure interval so the system is
    well-formed by construction.
    """
    if n_b < 1 or n_s < 1:
        raise GenerationError("need at least one state per level")
    if not 0 < density <= 1:
        raise GenerationError("density must be in (0, 1]")
    rng = random.Random(seed)
    hi = n_s * _LABEL_WIDTH - 1
    sig = Signature([("x", BoundedInt(0, hi))])

    def interval(i):
        return i * _LABEL_WIDTH, i * _LABEL_WIDTH + _LABEL_WIDTH - 1

    lo0, hi0 = interval(0)
    if lo0 > hi0:
        raise GenerationError("empty initial constraint interval")

    states = [BState(f"b{i}", {"x": rng.randint(0, hi)}) for i in range(n_b)]
    states[0].obs["x"] = rng.randint(lo0, hi0)  # retarget q0 into the r0 region
    b_trans = [(f"b{i}", f"b{j}")
               for i in range(n_b) for j in range(n_b)
               if rng.random() < density]
    b = BLevel(states, "b0", b_trans)

    s_states = []
    for i in range(n_s):
        lo, hi_i = interval(i)
        s_states.append((f"r{i}", parse_formula(f"x >= {lo} && x <= {hi_i}", sig)))
    s_trans = []
    for i in range(n_s):
        for j in range(n_s):
            if rng.random() >= 0.5:
                continue
            kind = rng.randrange(4)
            if kind == 0:
                text = "true"
            elif kind == 1:
                text = f"x >= {rng.randint(0, hi)}"
            elif kind == 2:
                text = f"x <= {rng.randint(0, hi)}"
            else:
                a = rng.randint(0, hi)
                text = f"x >= {a} && x <= {rng.randint(a, hi)}"
            s_trans.append(STransition(f"r{i}", parse_formula(text, sig), f"r{j}"))
    s = SLevel(s_states, "r0", s_trans)

    sys = SBSystem(f"gen_seed{seed}", sig, b, s)
    problems = validate(sys)
    if problems:
        raise GenerationError(f"generated system invalid: {problems[0]}")
    return sys


def system_to_dsl(sys: SBSystem) -> str:
    """Serialize a system in the model DSL, deterministically."""

    def value_text(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        return str(v)

    lines = [f"system {sys.name}", "", "observables"]
    for name, sort in sys.sig.items():
        if isinstance(sort, BoundedInt):
            lines.append(f"  {name} : int {sort.lo}..{sort.hi}")
        elif isinstance(sort, BoolSort):
            lines.append(f"  {name} : bool")
        elif isinstance(sort, EnumSort):
            lines.append(f"  {name} : enum {{ {', '.join(sort.labels)} }}")
    lines += ["", "behaviour explicit"]
    for st in sys.b.states.values():
        body = ", ".join(f"{n}={value_text(st.obs[n])}" for n in sys.sig.names)
        lines.append(f"  state {st.id} {{ {body} }}")
    lines.append(f"  init {sys.b.initial}")
    for src, dst in sys.b.transitions:
        lines.append(f"  trans {src} -> {dst}")
    lines += ["", "structure"]
    for rid, label in sys.s.states.items():
        lines.append(f"  state {rid} : {pretty(label)}")
    lines.append(f"  init {sys.s.initial}")
    for tr in sys.s.transitions:
        lines.append(f"  trans {tr.source} -> {tr.target} inv {pretty(tr.inv)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Output helpers

_COLORS = {"green": "32", "red": "31"}


def _want_color() -> bool:
    return os.environ.get("SBCHECK_COLOR", "0") == "1"


def _paint(text: str, color: str) -> str:
    if _want_color():
        return f"\x1b[{_COLORS[color]}m{text}\x1b[0m"
    return text


def _holds_text(holds: bool) -> str:
    return _paint("holds", "green") if holds else _paint("fails", "red")


def _evidence_json(e: adapt.Evidence) -> dict:
    return {
        "prefix": [flatten.state_json(f) for f in e.prefix],
        "cycle": [flatten.state_json(f) for f in e.cycle],
    }


def _verdict_json(sys: SBSystem, mode: str, holds: bool,
                  relation, evidence) -> str:
    doc = {
        "system": sys.name,
        "mode": mode,
        "holds": holds,
        "relation": None if relation is None else [list(p) for p in relation],
        "evidence": {"prefix": [], "cycle": []} if evidence is None
        else _evidence_json(evidence),
    }
    return json.dumps(doc, indent=2)


def _print_evidence(e: adapt.Evidence, out):
    if e.prefix:
        print("  prefix:", file=out)
        for f in e.prefix:
            print(f"    {f}", file=out)
    if e.cycle:
        print("  cycle:", file=out)
        for f in e.cycle:
            print(f"    {f}", file=out)


def _load_valid(path) -> SBSystem:
    sys_ = load_model(path)
    problems = validate(sys_)
    if problems:
        raise ModelError("; ".join(str(p) for p in problems))
    return sys_


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_validate(args) -> int:
    sys_ = load_model(args.file)
    problems = validate(sys_)
    if not problems:
        print(f"{sys_.name}: valid")
        return 0
    for p in problems:
        print(str(p), file=_sys.stderr)
    return 1


def _cmd_flatten(args) -> int:
    sys_ = _load_valid(args.file)
    flat = flatten.build_flat(sys_)
    if args.format == "json":
        print(flatten.to_json(flat))
        return 0
    steady = sum(1 for f in flat.states if f.is_steady)
    print(f"{sys_.name}: {flat.n_states} flat states "
          f"({steady} steady, {flat.n_states - steady} adapting), "
          f"{flat.n_transitions} transitions")
    dead = flat.dead_states()
    if dead:
        print(f"dead states ({len(dead)}):")
        for f in dead:
            print(f"  {f}")
    return 0


def _cmd_check(args) -> int:
    sys_ = _load_valid(args.file)
    verdict = adapt.check_weak(sys_) if args.mode == "weak" else adapt.check_strong(sys_)
    if args.format == "json":
        print(_verdict_json(sys_, args.mode, verdict.holds, None, verdict.evidence))
    else:
        print(f"{sys_.name}: {args.mode} adaptability {_holds_text(verdict.holds)}")
        _print_evidence(verdict.evidence, _sys.stdout)
    return 0 if verdict.holds else 1


def _cmd_relation(args) -> int:
    sys_ = _load_valid(args.file)
    if args.mode == "weak":
        rel = adapt.weak_relation(sys_)
        holds = (sys_.b.initial, sys_.s.initial) in rel
        shown = rel
    else:
        rel = adapt.strong_relation(sys_)
        holds = rel is not None
        shown = rel if rel is not None else adapt.AdaptRelation(frozenset())
    if args.format == "json":
        print(_verdict_json(sys_, args.mode, holds, list(shown), None))
    else:
        print(f"{sys_.name}: {args.mode} adaptability {_holds_text(holds)} "
              f"({len(shown)} pairs)")
        for q, r in shown:
            print(f"  ({q}, {r})")
    return 0 if holds else 1


def _cmd_verify_relation(args) -> int:
    sys_ = _load_valid(args.file)
    with open(args.relation, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    rel = adapt.AdaptRelation.of((q, r) for q, r in doc["pairs"])
    checker = adapt.is_weak_adaptation if args.mode == "weak" else adapt.is_strong_adaptation
    result = checker(sys_, rel)
    word = "is" if result.ok else "is not"
    print(f"{sys_.name}: given relation {word} a {args.mode} adaptation "
          f"({len(rel)} pairs)")
    for v in result.violations:
        print(f"  {v}")
    return 0 if result.ok else 1


def _cmd_ctl(args) -> int:
    sys_ = _load_valid(args.file)
    phi = parse_ctl(args.ctl)
    root = None
    if args.at:
        parts = args.at.split(",")
        if len(parts) != 2:
            raise ModelError("--at expects '<q>,<r>'")
        root = (parts[0].strip(), parts[1].strip())
    flat = flatten.build_flat(sys_, root=root)
    k = kripke.to_kripke(flat)
    holds = k.initial in sat_set(k, phi)
    at = str(flat.initial)
    print(f"{sys_.name}: {args.ctl} {_holds_text(holds)} at {at}")
    return 0 if holds else 1


def _cmd_export(args) -> int:
    sys_ = _load_valid(args.file)
    flat = flatten.build_flat(sys_)
    if args.stage == "flat":
        text = flatten.to_dot(flat) if args.format == "dot" else flatten.to_json(flat)
    else:
        k = kripke.to_kripke(flat)
        if args.format == "dot":
            text = kripke.to_dot(k)
        else:
            doc = {
                "system": sys_.name,
                "initial": k.initial,
                "states": [
                    {"state": flatten.state_json(f),
                     "labels": sorted(k.labels[i])}
                    for i, f in enumerate(k.states)
                ],
                "edges": [[i, j] for i in range(k.n_states) for j in k.succ[i]],
            }
            text = json.dumps(doc, indent=2)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text, end="" if text.endswith("\n") else "\n")
    return 0


def _cmd_gen(args) -> int:
    sys_ = gen_random(args.seed, args.b_states, args.s_states, args.density)
    text = system_to_dsl(sys_)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"wrote {args.output}: {args.b_states} behaviour states, "
          f"{args.s_states} structure states")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="sbcheck",
        description="Adaptability checker for two-level constrained state machines.")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check model well-formedness")
    p.add_argument("file")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("flatten", help="build the flat semantics")
    p.add_argument("file")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=_cmd_flatten)

    p = sub.add_parser("check", help="decide adaptability by model checking")
    p.add_argument("file")
    p.add_argument("--mode", choices=("weak", "strong"), required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("relation", help="decide adaptability by relation construction")
    p.add_argument("file")
    p.add_argument("--mode", choices=("weak", "strong"), required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=_cmd_relation)

    p = sub.add_parser("verify-relation", help="check a user-supplied relation")
    p.add_argument("file")
    p.add_argument("--relation", required=True, help="JSON file with a 'pairs' list")
    p.add_argument("--mode", choices=("weak", "strong"), required=True)
    p.set_defaults(func=_cmd_verify_relation)

    p = sub.add_parser("ctl", help="check an arbitrary CTL formula")
    p.add_argument("file")
    p.add_argument("--ctl", required=True)
    p.add_argument("--at", help="seed the flat semantics at '<q>,<r>'")
    p.set_defaults(func=_cmd_ctl)

    p = sub.add_parser("export", help="export the flat or Kripke structure")
    p.add_argument("file")
    p.add_argument("--format", choices=("dot", "json"), required=True)
    p.add_argument("--stage", choices=("flat", "kripke"), default="flat")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("gen", help="generate a random system")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--b-states", type=int, default=8)
    p.add_argument("--s-states", type=int, default=2)
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_gen)
    return top


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (ModelError, FormulaError, CtlError, GenerationError,
            adapt.PreconditionError, FileNotFoundError, ValueError) as exc:
        print(f"sbcheck: error: {exc}", file=_sys.stderr)
        return 2


def main() -> None:
    _sys.exit(run(_sys.argv[1:]))


if __name__ == "__main__":
    main()
