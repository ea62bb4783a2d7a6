"""Seeded random problem generation for differential testing.

Problems are built around a concrete witness trajectory: a random initial
state is simulated forward through randomly chosen applicable events, and
the problem's facts are sampled from what is actually true along the way.
Every generated problem therefore validates and is satisfiable by
construction, while fact dropping keeps it honestly incomplete.

Non-occurrence assertions are biased toward *protecting* a fluent that is
true at some instant (one assertion per threat over one step), which is what
gives the proof engine persistence inferences worth checking against the
completion oracle.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .domain import (
    CONTAINER_SORTS,
    PARENT_SORTS,
    ASSERTABLE_FLUENTS,
    ComponentsTriple,
    Fluent,
    NonOccurrence,
    Occurrence,
    Signature,
    Sort,
    direct_contained,
    effective,
    ineffective,
    outside_at,
)
from .oracle import WorldState, applicable_actions, apply_action, true_fluents
from .specdsl import ProblemSpec, validate_spec
from .worldmodel import threats_for


@dataclass(frozen=True)
class GenConfig:
    max_objects: int = 4
    max_locations: int = 2
    max_time_points: int = 4
    triple_probability: float = 0.5
    event_probability: float = 0.6
    drop_fact_probability: float = 0.2
    extra_holds_probability: float = 0.35
    protect_probability: float = 0.85
    max_extra_not_occurs: int = 2


DEFAULT_CONFIG = GenConfig()

_PREFIX = {
    Sort.BLOCK: "ob",
    Sort.OPEN_CONTAINER: "oc",
    Sort.CLOSED_CONTAINER: "cc",
    Sort.LID: "ol",
    Sort.CONTAINER_WITH_LID: "ow",
}


def _universe(rng: random.Random, cfg: GenConfig) -> Signature:
    sorts: dict[str, Sort] = {}
    triples: list[ComponentsTriple] = []
    budget = rng.randint(1, cfg.max_objects)
    if budget >= 3 and rng.random() < cfg.triple_probability:
        sorts["oc1"] = Sort.OPEN_CONTAINER
        sorts["ol1"] = Sort.LID
        sorts["ow1"] = Sort.CONTAINER_WITH_LID
        triples.append(ComponentsTriple("oc1", "ol1", "ow1"))
        budget -= 3
    fillers = (
        Sort.BLOCK,
        Sort.OPEN_CONTAINER,
        Sort.CLOSED_CONTAINER,
        Sort.BLOCK,
    )
    counts: dict[Sort, int] = {Sort.OPEN_CONTAINER: len(triples)}
    for _ in range(budget):
        sort = rng.choice(fillers)
        counts[sort] = counts.get(sort, 0) + 1
        sorts[f"{_PREFIX[sort]}{counts[sort]}"] = sort
    n_locs = rng.randint(1, cfg.max_locations)
    locations = frozenset(("la", "lb", "lc", "ld")[:n_locs])
    return Signature(sorts=sorts, locations=locations, triples=tuple(triples))


def _random_state(rng: random.Random, sig: Signature) -> WorldState:
    assembled = {t: rng.random() < 0.5 for t in sig.triples}
    effective_set: set[str] = set()
    for o, sort in sig.sorts.items():
        if sort in (Sort.BLOCK, Sort.CLOSED_CONTAINER):
            effective_set.add(o)
        elif sort is Sort.OPEN_CONTAINER:
            t = sig.triple_for_container(o)
            if t is None or not assembled[t]:
                effective_set.add(o)
        elif sort is Sort.LID:
            t = sig.triple_for_lid(o)
            if t is None or not assembled[t]:
                effective_set.add(o)
        else:
            t = sig.triple_for_composite(o)
            if t is not None and assembled[t]:
                effective_set.add(o)
    positioned = [o for o in sig.ordered_objects() if o in effective_set]
    rng.shuffle(positioned)
    locs = sig.ordered_locations()
    at: dict[str, str] = {}
    inside: dict[str, str] = {}
    placed: list[str] = []
    for o in positioned:
        parents = [
            c
            for c in placed
            if sig.sort_of(c) in PARENT_SORTS and c in effective_set
        ]
        for t in sig.triples:
            if assembled[t] and t.composite in placed:
                parents.append(t.container)
        if parents and rng.random() < 0.45:
            inside[o] = rng.choice(sorted(parents))
        else:
            at[o] = rng.choice(locs)
        placed.append(o)
    return WorldState(frozenset(effective_set), at, inside)


def _state_facts(sig: Signature, state: WorldState) -> list[Fluent]:
    facts: list[Fluent] = []
    for o, l in sorted(state.at.items()):
        facts.append(outside_at(o, l))
    for o, c in sorted(state.inside.items()):
        facts.append(direct_contained(o, c))
    status_worthy: set[str] = set()
    for t in sig.triples:
        status_worthy.update({t.container, t.lid, t.composite})
    for o, s in sig.sorts.items():
        if s is Sort.CONTAINER_WITH_LID:
            status_worthy.add(o)
    for o in sorted(status_worthy):
        facts.append(
            effective(o) if o in state.effective else ineffective(o)
        )
    return facts


def _interiors_overlap(i1: int, j1: int, i2: int, j2: int) -> bool:
    return i2 < j1 and i1 < j2


def _generate(
    rng: random.Random, cfg: GenConfig
) -> tuple[ProblemSpec, list[WorldState]]:
    sig = _universe(rng, cfg)
    n_points = rng.randint(2, cfg.max_time_points)
    points = [f"t{i}" for i in range(n_points)]
    pairs = list(zip(points, points[1:]))

    state = _random_state(rng, sig)
    states = [state]
    occurrences: list[Occurrence] = []
    for i in range(n_points - 1):
        if rng.random() < cfg.event_probability:
            acts = applicable_actions(sig, state)
            if acts:
                action = rng.choice(acts)
                occurrences.append(Occurrence(points[i], points[i + 1], action))
                state = apply_action(sig, state, action)
        states.append(state)

    holds: list[tuple[str, Fluent]] = [
        (points[0], f) for f in _state_facts(sig, states[0])
    ]
    for i in range(1, n_points):
        if rng.random() < cfg.extra_holds_probability:
            candidates = sorted(
                (f for f in true_fluents(sig, states[i])
                 if f.name in ASSERTABLE_FLUENTS),
                key=str,
            )
            if candidates:
                for f in rng.sample(candidates, k=min(2, len(candidates))):
                    holds.append((points[i], f))

    occ_spans = [
        (points.index(o.start), points.index(o.end), o.action) for o in occurrences
    ]

    def consistent(non: NonOccurrence) -> bool:
        lo, hi = points.index(non.start), points.index(non.end)
        for i1, j1, action in occ_spans:
            if _interiors_overlap(i1, j1, lo, hi) and non.pattern.matches(action):
                return False
        return True

    nons: dict[NonOccurrence, None] = {}
    if n_points >= 2 and rng.random() < cfg.protect_probability:
        gap = rng.randrange(n_points - 1)
        candidates = sorted(
            (f for f in true_fluents(sig, states[gap])
             if f.name in ASSERTABLE_FLUENTS),
            key=str,
        )
        if candidates:
            protected = rng.choice(candidates)
            group = [
                NonOccurrence(points[gap], points[gap + 1], p)
                for p in threats_for(sig, protected)
            ]
            if all(consistent(n) for n in group):
                for n in group:
                    nons.setdefault(n)
    objs = sig.ordered_objects()
    opens = [o for o in objs if sig.sort_of(o) is Sort.OPEN_CONTAINER]
    containers = [o for o in objs if sig.sort_of(o) in CONTAINER_SORTS]
    for _ in range(rng.randint(0, cfg.max_extra_not_occurs)):
        lo = rng.randrange(n_points - 1)
        hi = rng.randint(lo + 1, n_points - 1)
        pool = [("dump", (None,))]
        if opens:
            oc = rng.choice(opens)
            pool.append(("unload", (None, oc)))
            pool.append(("load", (rng.choice(objs), None)))
        pool.append(("carry", (rng.choice(objs), None)))
        for t in sig.triples:
            pool.append(("unseal", (t.composite, None, None)))
        name, slots = rng.choice(pool)
        from .domain import ActionPattern

        non = NonOccurrence(points[lo], points[hi], ActionPattern(name, slots))
        if consistent(non):
            nons.setdefault(non)

    spec = ProblemSpec.assemble(
        signature=sig,
        earlier_pairs=pairs,
        holds_facts=holds,
        occurrences=occurrences,
        non_occurrences=nons,
    )
    report = validate_spec(spec)
    if not report.valid:  # pragma: no cover - generator contract
        raise RuntimeError(f"generated an invalid problem: {report.errors()}")
    return spec, states


def _drop_facts(rng: random.Random, spec: ProblemSpec, p: float) -> ProblemSpec:
    keep_holds = [h for h in spec.holds_facts if rng.random() >= p]
    keep_occs = [o for o in spec.occurrences if rng.random() >= p]
    keep_nons = [n for n in spec.non_occurrences if rng.random() >= p]
    out = ProblemSpec.assemble(
        signature=spec.signature,
        earlier_pairs=spec.earlier_pairs,
        holds_facts=keep_holds,
        occurrences=keep_occs,
        non_occurrences=keep_nons,
        extra_time_points=spec.time_points,
    )
    report = validate_spec(out)
    if not report.valid:  # pragma: no cover - dropping facts keeps validity
        raise RuntimeError(f"dropped into an invalid problem: {report.errors()}")
    return out


def random_spec(
    rng: random.Random, config: GenConfig = DEFAULT_CONFIG
) -> ProblemSpec:
    """One random valid, satisfiable problem."""
    spec, _states = _generate(rng, config)
    return _drop_facts(rng, spec, config.drop_fact_probability)


def random_spec_pair(
    rng: random.Random, config: GenConfig = DEFAULT_CONFIG
) -> tuple[ProblemSpec, ProblemSpec]:
    """A pair (sub, full) of valid problems where sub's facts are a subset
    of full's: used for monotonicity checks."""
    full, _states = _generate(rng, config)
    sub = _drop_facts(rng, full, max(config.drop_fact_probability, 0.3))
    return sub, full
