"""Closed-world ground truth for the microworld.

Two layers live here:

* A total-state simulator: :class:`WorldState` snapshots (who is effective,
  who sits where), ``apply_action`` with full preconditions and effects
  (including the recursive spill of ``dump``), and ``eval_fluent``.

* A bounded enumerator of *completions*: fully specified closed worlds
  (extended universe, total initial state, dated events in the gaps between
  named instants) consistent with a problem's facts.  ``entailed_by_all``
  decides whether a fluent holds at a named instant in every completion
  within bounds, and produces a concrete falsifying world when it does not.

The containment state is a forest of direct-containment edges.  While a
lidded container is assembled, its contents stay attached to the open
component; evaluation lifts containment to the effective composite.  Only
effective objects are positioned; the components of an assembled composite
carry no position of their own.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .domain import (
    CONTAINER_SORTS,
    PARENT_SORTS,
    Action,
    ComponentsTriple,
    Fluent,
    NonOccurrence,
    Occurrence,
    Signature,
    Sort,
    check_action,
    direct_contained,
    effective as eff_fluent,
    ineffective as ineff_fluent,
    outside_at,
)
from .specdsl import ProblemSpec

_FRESH_BASE = {
    Sort.BLOCK: "freshBlock",
    Sort.OPEN_CONTAINER: "freshOpen",
    Sort.LID: "freshLid",
    Sort.CONTAINER_WITH_LID: "freshLidded",
    Sort.CLOSED_CONTAINER: "freshClosed",
}


class PreconditionFailure(Exception):
    """An action was not applicable; ``reason`` is a stable code."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}{': ' + detail if detail else ''}")


@dataclass(frozen=True, eq=False)
class WorldState:
    """Total snapshot: effectivity plus a containment forest.

    ``at`` maps each top-level object to its location; ``inside`` maps each
    directly contained object to its container.  Every effective object is
    in exactly one of the two maps.
    """

    effective: frozenset[str]
    at: dict[str, str]
    inside: dict[str, str]
    _key: tuple = field(init=False, repr=False)

    def __post_init__(self) -> None:
        key = (
            tuple(sorted(self.effective)),
            tuple(sorted(self.at.items())),
            tuple(sorted(self.inside.items())),
        )
        object.__setattr__(self, "_key", key)

    @staticmethod
    def build(
        effective: Iterator[str] | frozenset[str],
        at: dict[str, str],
        inside: dict[str, str],
    ) -> "WorldState":
        return WorldState(frozenset(effective), dict(at), dict(inside))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, WorldState) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def is_top_level(self, obj: str) -> bool:
        return obj in self.at


def state_lines(state: WorldState) -> list[str]:
    """Stable one-line-per-fact rendering, used for golden comparisons."""
    lines = [f"effective {o}" for o in sorted(state.effective)]
    lines += [f"topLevel {o} {l}" for o, l in sorted(state.at.items())]
    lines += [f"inside {o} {c}" for o, c in sorted(state.inside.items())]
    return lines


def _absorbed(sig: Signature, state: WorldState, obj: str) -> bool:
    """A component of a currently assembled lidded container."""
    triple = sig.triple_for_container(obj) or sig.triple_for_lid(obj)
    return triple is not None and triple.composite in state.effective


def _step_up(sig: Signature, state: WorldState, obj: str) -> Optional[tuple[str, bool]]:
    """One step up the containment forest: (node, via_real_edge).

    Absorbed components lift to their composite without a real edge."""
    parent = state.inside.get(obj)
    if parent is not None:
        return parent, True
    if obj not in state.effective and _absorbed(sig, state, obj):
        triple = sig.triple_for_container(obj) or sig.triple_for_lid(obj)
        assert triple is not None
        return triple.composite, False
    return None


def _chain_up(sig: Signature, state: WorldState, obj: str) -> list[tuple[str, bool]]:
    """All nodes strictly above ``obj``: (node, saw_real_edge_on_path)."""
    out: list[tuple[str, bool]] = []
    seen = {obj}
    cur = obj
    saw_edge = False
    while True:
        step = _step_up(sig, state, cur)
        if step is None:
            return out
        cur, real = step
        saw_edge = saw_edge or real
        if cur in seen:  # cyclic forest is invalid; treat as chain end
            return out
        seen.add(cur)
        out.append((cur, saw_edge))


def is_barrier(sig: Signature, state: WorldState, obj: str) -> bool:
    """A boundary spilled contents cannot cross: a closed container, an
    assembled lidded container, or the open component of one."""
    sort = sig.sort_of(obj)
    if sort is Sort.CLOSED_CONTAINER:
        return True
    if sort is Sort.CONTAINER_WITH_LID:
        return obj in state.effective
    if sort is Sort.OPEN_CONTAINER:
        triple = sig.triple_for_container(obj)
        return triple is not None and triple.composite in state.effective
    return False


def _landing(sig: Signature, barrier: str) -> str:
    """Where spilled contents trapped by ``barrier`` come to rest."""
    if sig.sort_of(barrier) is Sort.CONTAINER_WITH_LID:
        triple = sig.triple_for_composite(barrier)
        if triple is not None:
            return triple.container
    return barrier


def eval_fluent(sig: Signature, state: WorldState, q: Fluent) -> bool:
    name = q.name
    if name == "outsideAt":
        o, l = q.args
        return state.at.get(o) == l
    if name == "directContained":
        a, c = q.args
        return state.inside.get(a) == c
    if name == "effective":
        return q.args[0] in state.effective
    if name == "ineffective":
        return q.args[0] not in state.effective
    if name == "contained":
        a, b = q.args
        return any(node == b and real for node, real in _chain_up(sig, state, a))
    if name == "unshielded":
        a, b = q.args
        chain = _chain_up(sig, state, a)
        for i, (node, real) in enumerate(chain):
            if node == b:
                if not real:
                    return False
                return not any(
                    is_barrier(sig, state, n) for n, _ in chain[: i + 1]
                )
        return False
    raise ValueError(f"unknown fluent kind {name!r}")  # pragma: no cover


def true_fluents(sig: Signature, state: WorldState) -> frozenset[Fluent]:
    """All fluents true in ``state``, including derived unshielded facts."""
    out: set[Fluent] = set()
    for o, l in state.at.items():
        out.add(outside_at(o, l))
    for o, c in state.inside.items():
        out.add(direct_contained(o, c))
    for o in sig.sorts:
        if o in state.effective:
            out.add(eff_fluent(o))
        else:
            out.add(ineff_fluent(o))
    for o in sig.sorts:
        chain = _chain_up(sig, state, o)
        blocked = False
        for node, real in chain:
            if real:
                out.add(Fluent("contained", (o, node)))
                if not blocked and not is_barrier(sig, state, node):
                    out.add(Fluent("unshielded", (o, node)))
            if is_barrier(sig, state, node):
                blocked = True
    return frozenset(out)


def state_problems(sig: Signature, state: WorldState) -> list[str]:
    """Invariant violations; empty for a well-formed snapshot."""
    out: list[str] = []
    for o in state.effective:
        if not sig.is_object(o):
            out.append(f"effective id {o!r} not declared")
    positioned = set(state.at) | set(state.inside)
    if set(state.at) & set(state.inside):
        overlap = sorted(set(state.at) & set(state.inside))
        out.append(f"objects both top-level and contained: {overlap}")
    if positioned != set(state.effective):
        out.append("positioned objects differ from effective objects")
    for o, l in state.at.items():
        if not sig.is_location(l):
            out.append(f"{o!r} placed at undeclared location {l!r}")
    for o, c in state.inside.items():
        sort = sig.sort_of(c)
        if sort not in PARENT_SORTS:
            out.append(f"{o!r} directly inside {c!r}, which cannot hold contents")
        elif c not in state.effective and not _absorbed(sig, state, c):
            out.append(f"{o!r} directly inside absent container {c!r}")
    for name, sort in sig.sorts.items():
        if sort in (Sort.BLOCK, Sort.CLOSED_CONTAINER):
            if name not in state.effective:
                out.append(f"{name!r} of sort {sort.value} must be effective")
        elif sort in (Sort.OPEN_CONTAINER, Sort.LID):
            triple = (
                sig.triple_for_container(name)
                if sort is Sort.OPEN_CONTAINER
                else sig.triple_for_lid(name)
            )
            if triple is None and name not in state.effective:
                out.append(f"stand-alone {sort.value} {name!r} must be effective")
    for triple in sig.triples:
        comp_eff = triple.composite in state.effective
        oc_eff = triple.container in state.effective
        ol_eff = triple.lid in state.effective
        if comp_eff and (oc_eff or ol_eff):
            out.append(f"{triple} assembled but a component is still effective")
        if not comp_eff and oc_eff != ol_eff:
            out.append(f"{triple} components differ in effectivity")
        if not comp_eff and not oc_eff and not ol_eff:
            out.append(f"{triple} neither assembled nor split")
    # forest acyclicity
    for o in state.inside:
        seen = {o}
        cur = o
        while True:
            step = _step_up(sig, state, cur)
            if step is None:
                break
            cur = step[0]
            if cur in seen:
                out.append(f"containment cycle through {cur!r}")
                break
            seen.add(cur)
    return out


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------


def apply_action(sig: Signature, state: WorldState, action: Action) -> WorldState:
    """Apply one action; raises :class:`PreconditionFailure` when it is not
    applicable and ``ValueError`` when the term is ill-sorted."""
    problems = check_action(sig, action)
    if problems:
        raise ValueError("; ".join(problems))
    name = action.name

    def need_effective(o: str) -> None:
        if o not in state.effective:
            raise PreconditionFailure("not-effective", o)

    def need_top_level(o: str) -> None:
        if o not in state.at:
            raise PreconditionFailure("not-top-level", o)

    if name == "carry":
        o, l = action.args
        need_effective(o)
        need_top_level(o)
        at = dict(state.at)
        at[o] = l
        return WorldState(state.effective, at, dict(state.inside))

    if name == "load":
        o, oc = action.args
        if sig.sort_of(oc) is not Sort.OPEN_CONTAINER:
            raise PreconditionFailure("wrong-sort", f"{oc} is not an open container")
        if o == oc:
            raise PreconditionFailure("self-containment", o)
        need_effective(o)
        need_effective(oc)
        need_top_level(o)
        need_top_level(oc)
        if state.at[o] != state.at[oc]:
            raise PreconditionFailure("location-mismatch", f"{o} vs {oc}")
        at = dict(state.at)
        del at[o]
        inside = dict(state.inside)
        inside[o] = oc
        return WorldState(state.effective, at, inside)

    if name == "unload":
        o, oc = action.args
        if sig.sort_of(oc) is not Sort.OPEN_CONTAINER:
            raise PreconditionFailure("wrong-sort", f"{oc} is not an open container")
        need_effective(oc)
        need_top_level(oc)
        if state.inside.get(o) != oc:
            raise PreconditionFailure("not-directly-contained", f"{o} in {oc}")
        inside = dict(state.inside)
        del inside[o]
        at = dict(state.at)
        at[o] = state.at[oc]
        return WorldState(state.effective, at, inside)

    if name == "seal":
        oc, ol, ow = action.args
        triple = sig.triple_for_composite(ow)
        if triple is None or triple != ComponentsTriple(oc, ol, ow):
            raise PreconditionFailure("no-components", f"seal({oc},{ol},{ow})")
        need_effective(oc)
        need_effective(ol)
        need_top_level(oc)
        need_top_level(ol)
        if state.at[oc] != state.at[ol]:
            raise PreconditionFailure("location-mismatch", f"{oc} vs {ol}")
        loc = state.at[oc]
        at = dict(state.at)
        del at[oc]
        del at[ol]
        at[ow] = loc
        effective = (state.effective - {oc, ol}) | {ow}
        return WorldState(effective, at, dict(state.inside))

    if name == "unseal":
        ow, ol, oc = action.args
        triple = sig.triple_for_composite(ow)
        if triple is None or triple != ComponentsTriple(oc, ol, ow):
            raise PreconditionFailure("no-components", f"unseal({ow},{ol},{oc})")
        need_effective(ow)
        need_top_level(ow)
        loc = state.at[ow]
        at = dict(state.at)
        del at[ow]
        at[oc] = loc
        at[ol] = loc
        effective = (state.effective - {ow}) | {oc, ol}
        return WorldState(effective, at, dict(state.inside))

    if name == "dump":
        (o,) = action.args
        if sig.sort_of(o) not in CONTAINER_SORTS:
            raise PreconditionFailure("wrong-sort", f"{o} is not a container")
        need_effective(o)
        need_top_level(o)
        loc = state.at[o]
        at = dict(state.at)
        inside = dict(state.inside)
        for x in list(state.inside):
            chain = _chain_up(sig, state, x)
            nodes = [n for n, _ in chain]
            if o not in nodes:
                continue
            upto = nodes[: nodes.index(o) + 1]
            barrier = next(
                (n for n in upto if is_barrier(sig, state, n)), None
            )
            if barrier is None:
                del inside[x]
                at[x] = loc
            else:
                inside[x] = _landing(sig, barrier)
        return WorldState(state.effective, at, inside)

    raise ValueError(f"unknown action kind {name!r}")  # pragma: no cover


def applicable_actions(sig: Signature, state: WorldState) -> list[Action]:
    """Ground actions applicable in ``state``, in canonical order."""
    objs = sig.ordered_objects()
    locs = sig.ordered_locations()
    tops = [o for o in objs if o in state.at]
    open_tops = [o for o in tops if sig.sort_of(o) is Sort.OPEN_CONTAINER]
    acts: list[Action] = []
    for o in tops:
        for l in locs:
            acts.append(Action("carry", (o, l)))
    for o in tops:
        for c in open_tops:
            if c != o and state.at[o] == state.at[c]:
                acts.append(Action("load", (o, c)))
    for c in open_tops:
        for o in objs:
            if state.inside.get(o) == c:
                acts.append(Action("unload", (o, c)))
    for triple in sig.triples:
        oc, ol, ow = triple.container, triple.lid, triple.composite
        if (
            oc in state.at
            and ol in state.at
            and state.at[oc] == state.at[ol]
        ):
            acts.append(Action("seal", (oc, ol, ow)))
        if ow in state.at:
            acts.append(Action("unseal", (ow, ol, oc)))
    for o in tops:
        if sig.sort_of(o) in CONTAINER_SORTS:
            acts.append(Action("dump", (o,)))
    return acts


# ---------------------------------------------------------------------------
# Bounded completions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompletionBounds:
    """Search bounds: fresh objects to add (by sort), fresh locations, and
    the number of unnamed events allowed in each gap between consecutive
    named instants.

    Fresh lidded containers are added without components: if initially
    effective they act as permanently sealed (and empty) units, if
    ineffective they stay inert.
    """

    extra_objects: tuple[Sort, ...] = ()
    extra_locations: int = 0
    max_events_per_gap: int = 0

    def __post_init__(self) -> None:
        if self.extra_locations < 0 or self.max_events_per_gap < 0:
            raise ValueError("bounds must be non-negative")


@dataclass(frozen=True)
class GapEvent:
    action: Action
    from_occurrence: bool = False


@dataclass(frozen=True)
class Completion:
    """One closed world consistent with a problem: an extended universe, a
    state at every named instant, and the dated events of every gap."""

    signature: Signature
    points: tuple[str, ...]
    states: tuple[WorldState, ...]
    gap_events: tuple[tuple[GapEvent, ...], ...]

    def state_at(self, point: str) -> WorldState:
        return self.states[self.points.index(point)]


@dataclass(frozen=True)
class EntailmentResult:
    status: str  # "entailed" | "falsified" | "unsatisfiable"
    witness: Optional[Completion] = None

    @property
    def entailed(self) -> bool:
        return self.status == "entailed"


def extend_signature(sig: Signature, bounds: CompletionBounds) -> Signature:
    sorts = dict(sig.sorts)
    fresh = set(sig.fresh)
    used = set(sorts) | set(sig.locations)
    counters: dict[Sort, int] = {}
    for sort in bounds.extra_objects:
        counters[sort] = counters.get(sort, 0) + 1
        name = f"{_FRESH_BASE[sort]}{counters[sort]}"
        while name in used:
            counters[sort] += 1
            name = f"{_FRESH_BASE[sort]}{counters[sort]}"
        sorts[name] = sort
        fresh.add(name)
        used.add(name)
    locations = set(sig.locations)
    n = 0
    for _ in range(bounds.extra_locations):
        n += 1
        name = f"freshLoc{n}"
        while name in used:
            n += 1
            name = f"freshLoc{n}"
        locations.add(name)
        fresh.add(name)
        used.add(name)
    return Signature(
        sorts=sorts,
        locations=frozenset(locations),
        triples=sig.triples,
        fresh=frozenset(fresh),
    )


class _Context:
    """Precomputed structure shared by the stream enumerator and the layered
    reachability pass."""

    def __init__(self, spec: ProblemSpec, bounds: CompletionBounds):
        if spec.timeline is None:
            raise ValueError("problem must validate before completion search")
        self.spec = spec
        self.bounds = bounds
        self.sig = extend_signature(spec.signature, bounds)
        self.timeline = spec.timeline
        self.points = spec.timeline.points
        self.objs = self.sig.ordered_objects()
        self.locs = self.sig.ordered_locations()
        self.occurrences = list(spec.occurrences)
        n_gaps = len(self.points) - 1
        idx = {p: i for i, p in enumerate(self.points)}
        self.occ_gaps: list[list[int]] = []
        self.gap_cover: dict[int, int] = {}
        for k, occ in enumerate(self.occurrences):
            gaps = list(range(idx[occ.start], idx[occ.end]))
            self.occ_gaps.append(gaps)
            for g in gaps:
                self.gap_cover[g] = k
        self.gap_patterns: list[list] = [[] for _ in range(n_gaps)]
        for non in spec.non_occurrences:
            lo, hi = idx[non.start], idx[non.end]
            for g in range(lo, hi):
                self.gap_patterns[g].append(non.pattern)
        self.holds_at: dict[str, list[Fluent]] = {}
        for t, fl in spec.holds_facts:
            self.holds_at.setdefault(t, []).append(fl)

    # -- initial states ----------------------------------------------------

    def initial_states(self) -> list[WorldState]:
        sig = self.sig
        t0 = self.points[0]
        facts = self.holds_at.get(t0, [])
        place_pin: dict[str, tuple[str, str]] = {}
        assembled_pin: dict[ComponentsTriple, bool] = {}
        lone_cwl_pin: dict[str, bool] = {}

        def pin_place(o: str, placement: tuple[str, str]) -> bool:
            if place_pin.get(o, placement) != placement:
                return False
            place_pin[o] = placement
            return True

        def pin_assembly(o: str, is_effective: bool) -> bool:
            sort = sig.sort_of(o)
            if sort is Sort.CONTAINER_WITH_LID:
                triple = sig.triple_for_composite(o)
                if triple is None:
                    if lone_cwl_pin.get(o, is_effective) != is_effective:
                        return False
                    lone_cwl_pin[o] = is_effective
                    return True
                want = is_effective
            elif sort in (Sort.OPEN_CONTAINER, Sort.LID):
                triple = (
                    sig.triple_for_container(o)
                    if sort is Sort.OPEN_CONTAINER
                    else sig.triple_for_lid(o)
                )
                if triple is None:
                    return is_effective  # stand-alone parts are always effective
                want = not is_effective
            else:
                return is_effective  # blocks and closed containers
            if assembled_pin.get(triple, want) != want:
                return False
            assembled_pin[triple] = want
            return True

        for fl in facts:
            if fl.name == "outsideAt":
                if not pin_place(fl.args[0], ("top", fl.args[1])):
                    return []
            elif fl.name == "directContained":
                if not pin_place(fl.args[0], ("in", fl.args[1])):
                    return []
                if sig.sort_of(fl.args[1]) not in PARENT_SORTS:
                    return []
            elif fl.name == "effective":
                if not pin_assembly(fl.args[0], True):
                    return []
            elif fl.name == "ineffective":
                if not pin_assembly(fl.args[0], False):
                    return []
            # contained facts are checked against candidate states below

        triples = list(sig.triples)
        lone_cwls = sorted(
            o
            for o, s in sig.sorts.items()
            if s is Sort.CONTAINER_WITH_LID and sig.triple_for_composite(o) is None
        )
        triple_choices = [
            [assembled_pin[t]] if t in assembled_pin else [False, True]
            for t in triples
        ]
        lone_choices = [
            [lone_cwl_pin[o]] if o in lone_cwl_pin else [False, True]
            for o in lone_cwls
        ]

        out: list[WorldState] = []
        for combo in itertools.product(*triple_choices, *lone_choices):
            assembled = dict(zip(triples, combo[: len(triples)]))
            lone_eff = dict(zip(lone_cwls, combo[len(triples) :]))
            effective: set[str] = set()
            for o, sort in sig.sorts.items():
                if sort in (Sort.BLOCK, Sort.CLOSED_CONTAINER):
                    effective.add(o)
                elif sort is Sort.OPEN_CONTAINER:
                    triple = sig.triple_for_container(o)
                    if triple is None or not assembled[triple]:
                        effective.add(o)
                elif sort is Sort.LID:
                    triple = sig.triple_for_lid(o)
                    if triple is None or not assembled[triple]:
                        effective.add(o)
                else:
                    triple = sig.triple_for_composite(o)
                    if triple is not None:
                        if assembled[triple]:
                            effective.add(o)
                    elif lone_eff[o]:
                        effective.add(o)
            positioned = [o for o in self.objs if o in effective]
            if any(o not in effective for o in place_pin):
                continue
            parents = [
                c
                for c in self.objs
                if sig.sort_of(c) in PARENT_SORTS
                and (c in effective or _absorbed_static(sig, effective, c))
            ]
            self._fill(
                positioned, 0, place_pin, parents, effective, {}, {}, facts, out
            )
        return out

    def _fill(
        self,
        positioned: list[str],
        i: int,
        pins: dict[str, tuple[str, str]],
        parents: list[str],
        effective: set[str],
        at: dict[str, str],
        inside: dict[str, str],
        facts: list[Fluent],
        out: list[WorldState],
    ) -> None:
        if i == len(positioned):
            state = WorldState(frozenset(effective), dict(at), dict(inside))
            if _acyclic(self.sig, state) and all(
                eval_fluent(self.sig, state, f) for f in facts
            ):
                out.append(state)
            return
        obj = positioned[i]
        if obj in pins:
            options = [pins[obj]]
        else:
            options = [("top", l) for l in self.locs] + [
                ("in", c) for c in parents if c != obj
            ]
        for kind, target in options:
            if kind == "top":
                at[obj] = target
            else:
                if target == obj:
                    continue
                inside[obj] = target
            self._fill(positioned, i + 1, pins, parents, effective, at, inside,
                       facts, out)
            at.pop(obj, None)
            inside.pop(obj, None)

    # -- gap expansion -----------------------------------------------------

    def holds_ok(self, point: str, state: WorldState) -> bool:
        return all(
            eval_fluent(self.sig, state, f) for f in self.holds_at.get(point, ())
        )

    def unnamed_allowed(self, gap: int, action: Action) -> bool:
        return not any(p.matches(action) for p in self.gap_patterns[gap])

    def free_gap_runs(
        self, state: WorldState, gap: int
    ) -> Iterator[tuple[tuple[GapEvent, ...], WorldState]]:
        """Depth-first event sequences for an unconstrained gap: the empty
        run first, then longer runs in action order."""

        def rec(
            st: WorldState, events: tuple[GapEvent, ...]
        ) -> Iterator[tuple[tuple[GapEvent, ...], WorldState]]:
            yield events, st
            if len(events) >= self.bounds.max_events_per_gap:
                return
            for action in applicable_actions(self.sig, st):
                if not self.unnamed_allowed(gap, action):
                    continue
                nxt = apply_action(self.sig, st, action)
                yield from rec(nxt, events + (GapEvent(action),))

        yield from rec(state, ())

    def gap_runs(
        self, state: WorldState, gap: int, fired: tuple[bool, ...]
    ) -> Iterator[tuple[tuple[GapEvent, ...], WorldState, tuple[bool, ...]]]:
        """All (events, next state, fired flags) choices for one gap."""
        k = self.gap_cover.get(gap)
        if k is None:
            for events, nxt in self.free_gap_runs(state, gap):
                yield events, nxt, fired
            return
        occ = self.occurrences[k]
        last_gap = self.occ_gaps[k][-1]
        if fired[k]:
            yield (), state, fired
            return
        # The asserted event may complete in this gap; in its other covered
        # gaps nothing at all happens.
        try:
            nxt = apply_action(self.sig, state, occ.action)
        except PreconditionFailure:
            nxt = None
        if nxt is not None:
            new_fired = fired[:k] + (True,) + fired[k + 1 :]
            yield (GapEvent(occ.action, from_occurrence=True),), nxt, new_fired
        if gap != last_gap:
            yield (), state, fired


def _absorbed_static(sig: Signature, effective: set[str], obj: str) -> bool:
    triple = sig.triple_for_container(obj) or sig.triple_for_lid(obj)
    return triple is not None and triple.composite in effective


def _acyclic(sig: Signature, state: WorldState) -> bool:
    for o in state.inside:
        seen = {o}
        cur = o
        while True:
            step = _step_up(sig, state, cur)
            if step is None:
                break
            cur = step[0]
            if cur in seen:
                return False
            seen.add(cur)
    return True


def enumerate_completions(
    spec: ProblemSpec, bounds: CompletionBounds
) -> Iterator[Completion]:
    """Every completion within bounds, depth-first, deterministic order:
    initial-state choices first, then gap events in temporal order."""
    ctx = _Context(spec, bounds)
    n_points = len(ctx.points)
    fired0 = tuple(False for _ in ctx.occurrences)

    def rec(
        i: int,
        state: WorldState,
        fired: tuple[bool, ...],
        states: tuple[WorldState, ...],
        events: tuple[tuple[GapEvent, ...], ...],
    ) -> Iterator[Completion]:
        if i == n_points - 1:
            yield Completion(ctx.sig, ctx.points, states, events)
            return
        for run, nxt, new_fired in ctx.gap_runs(state, i, fired):
            if not ctx.holds_ok(ctx.points[i + 1], nxt):
                continue
            yield from rec(i + 1, nxt, new_fired, states + (nxt,), events + (run,))

    for s0 in ctx.initial_states():
        yield from rec(0, s0, fired0, (s0,), ())


class CompletionSpace:
    """Layered forward reachability over a problem's completions.

    ``layers[i]`` holds every (state, occurrence-progress) pair consistent
    with the facts up to named instant ``i``.  A fluent that holds with one
    polarity across a whole layer holds with that polarity at that instant
    in every completion; a mixed layer sends the caller to the exact
    stream for a verdict.
    """

    def __init__(self, spec: ProblemSpec, bounds: CompletionBounds):
        self.spec = spec
        self.bounds = bounds
        self.ctx = _Context(spec, bounds)
        self._layers: Optional[list[dict]] = None
        self._facts_cache: dict[WorldState, frozenset[Fluent]] = {}

    def layers(self) -> list[dict]:
        if self._layers is not None:
            return self._layers
        ctx = self.ctx
        fired0 = tuple(False for _ in ctx.occurrences)
        layer0: dict = {}
        for s0 in ctx.initial_states():
            layer0.setdefault((s0, fired0))
        layers = [layer0]
        for gap in range(len(ctx.points) - 1):
            nxt_layer: dict = {}
            point = ctx.points[gap + 1]
            for state, fired in layers[-1]:
                for _run, nxt, new_fired in ctx.gap_runs(state, gap, fired):
                    if not ctx.holds_ok(point, nxt):
                        continue
                    nxt_layer.setdefault((nxt, new_fired))
            layers.append(nxt_layer)
        self._layers = layers
        return layers

    def satisfiable(self) -> bool:
        return bool(self.layers()[-1])

    def states_at(self, point: str) -> list[WorldState]:
        i = self.ctx.timeline.index_of(point)
        seen: dict[WorldState, None] = {}
        for state, _fired in self.layers()[i]:
            seen.setdefault(state)
        return list(seen)

    def _facts(self, state: WorldState) -> frozenset[Fluent]:
        cached = self._facts_cache.get(state)
        if cached is None:
            cached = true_fluents(self.ctx.sig, state)
            self._facts_cache[state] = cached
        return cached

    def entailment(self, t: str, q: Fluent, expect: bool = True) -> EntailmentResult:
        if not self.satisfiable():
            return EntailmentResult("unsatisfiable")
        states = self.states_at(t)
        if all((q in self._facts(s)) == expect for s in states):
            return EntailmentResult("entailed")
        # Some forward-reachable state disagrees; it may still be pruned by
        # later facts, so confirm against the exact completion stream.
        i = self.ctx.timeline.index_of(t)
        for comp in enumerate_completions(self.spec, self.bounds):
            if eval_fluent(self.ctx.sig, comp.states[i], q) != expect:
                return EntailmentResult("falsified", comp)
        return EntailmentResult("entailed")


def entailed_by_all(
    spec: ProblemSpec,
    bounds: CompletionBounds,
    t: str,
    q: Fluent,
    expect: bool = True,
) -> EntailmentResult:
    """Does ``q`` evaluate to ``expect`` at ``t`` in every completion within
    bounds?  Returns the first falsifying completion otherwise."""
    return CompletionSpace(spec, bounds).entailment(t, q, expect)


# ---------------------------------------------------------------------------
# Witness serialization
# ---------------------------------------------------------------------------


def completion_to_spec(completion: Completion) -> ProblemSpec:
    """Rebuild a completion as a loadable closed problem: fresh ids keep
    their marker, every event is dated between refined consecutive instants,
    and the first instant carries a complete state description."""
    sig = completion.signature
    used = set(sig.sorts) | set(sig.locations) | set(completion.points)
    refined: list[str] = [completion.points[0]]
    occurrences: list[Occurrence] = []
    for gap, events in enumerate(completion.gap_events):
        left = completion.points[gap]
        prev = refined[-1]
        for j, ev in enumerate(events):
            if j == len(events) - 1:
                nxt = completion.points[gap + 1]
            else:
                nxt = f"{left}e{j + 1}"
                while nxt in used:
                    nxt += "x"
                used.add(nxt)
                refined.append(nxt)
            occurrences.append(Occurrence(prev, nxt, ev.action))
            prev = nxt
        if not events:
            refined.append(completion.points[gap + 1])
        elif refined[-1] != completion.points[gap + 1]:
            refined.append(completion.points[gap + 1])
    pairs = tuple(zip(refined, refined[1:]))

    first = completion.states[0]
    t0 = completion.points[0]
    holds: list[tuple[str, Fluent]] = []
    for o, l in first.at.items():
        holds.append((t0, outside_at(o, l)))
    for o, c in first.inside.items():
        holds.append((t0, direct_contained(o, c)))
    status_worthy: set[str] = set()
    for triple in sig.triples:
        status_worthy.update({triple.container, triple.lid, triple.composite})
    for o, s in sig.sorts.items():
        if s is Sort.CONTAINER_WITH_LID:
            status_worthy.add(o)
    for o in sorted(status_worthy):
        if o in first.effective:
            holds.append((t0, eff_fluent(o)))
        else:
            holds.append((t0, ineff_fluent(o)))

    return ProblemSpec.assemble(
        signature=sig,
        earlier_pairs=pairs,
        holds_facts=holds,
        occurrences=occurrences,
        non_occurrences=(),
    )


def completion_to_spec_text(completion: Completion) -> str:
    from .specdsl import format_spec

    return format_spec(completion_to_spec(completion))
