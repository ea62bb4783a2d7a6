"""Ground vocabulary of the container microworld.

Objects come in five sorts.  A lidded container is assembled from an open
container and a lid; the three ids are tied together by a components triple.
Time is a finite chain of named instants.  Fluents and actions are flat
ground terms over object, location and time ids.  Wildcard slots are allowed
only in action patterns, which denote sets of ground actions (used by
non-occurrence assertions and by the persistence threat table).

Everything in this module is an immutable value; all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional


class Sort(Enum):
    BLOCK = "block"
    OPEN_CONTAINER = "openContainer"
    LID = "lid"
    CONTAINER_WITH_LID = "containerWithLid"
    CLOSED_CONTAINER = "closedContainer"


#: Sorts whose instances can hold other objects.
CONTAINER_SORTS = frozenset(
    {Sort.OPEN_CONTAINER, Sort.CONTAINER_WITH_LID, Sort.CLOSED_CONTAINER}
)

#: Sorts that may appear as the parent of a direct-containment edge.  The
#: contents of an assembled lidded container hang off its open component,
#: never off the composite itself.
PARENT_SORTS = frozenset({Sort.OPEN_CONTAINER, Sort.CLOSED_CONTAINER})


# ---------------------------------------------------------------------------
# Fluents
# ---------------------------------------------------------------------------

FLUENT_ARITY = {
    "outsideAt": 2,
    "directContained": 2,
    "contained": 2,
    "effective": 1,
    "ineffective": 1,
    "unshielded": 2,
}

#: Fluent slot kinds, used by sort checking.
FLUENT_SLOTS = {
    "outsideAt": ("object", "location"),
    "directContained": ("object", "object"),
    "contained": ("object", "object"),
    "effective": ("object",),
    "ineffective": ("object",),
    "unshielded": ("object", "object"),
}

#: Fluents a problem statement may assert.  ``unshielded`` is derivable only:
#: it may appear in queries and in rule conditions, never in given facts.
ASSERTABLE_FLUENTS = frozenset(FLUENT_ARITY) - {"unshielded"}


@dataclass(frozen=True)
class Fluent:
    """A ground Boolean fluent, e.g. ``contained(oa,ow)``."""

    name: str
    args: tuple[str, ...]

    def __post_init__(self) -> None:
        arity = FLUENT_ARITY.get(self.name)
        if arity is None:
            raise ValueError(f"unknown fluent kind {self.name!r}")
        if len(self.args) != arity:
            raise ValueError(
                f"{self.name} takes {arity} argument(s), got {len(self.args)}"
            )

    def __str__(self) -> str:
        return f"{self.name}({','.join(self.args)})"


def outside_at(obj: str, loc: str) -> Fluent:
    return Fluent("outsideAt", (obj, loc))


def direct_contained(obj: str, container: str) -> Fluent:
    return Fluent("directContained", (obj, container))


def contained(obj: str, container: str) -> Fluent:
    return Fluent("contained", (obj, container))


def effective(obj: str) -> Fluent:
    return Fluent("effective", (obj,))


def ineffective(obj: str) -> Fluent:
    return Fluent("ineffective", (obj,))


def unshielded(obj: str, container: str) -> Fluent:
    return Fluent("unshielded", (obj, container))


# ---------------------------------------------------------------------------
# Actions and action patterns
# ---------------------------------------------------------------------------

ACTION_ARITY = {
    "carry": 2,
    "load": 2,
    "unload": 2,
    "seal": 3,
    "unseal": 3,
    "dump": 1,
}

ACTION_SLOTS = {
    "carry": ("object", "location"),
    "load": ("object", "object"),
    "unload": ("object", "object"),
    "seal": ("object", "object", "object"),
    "unseal": ("object", "object", "object"),
    "dump": ("object",),
}

#: Canonical ordering of action kinds, used wherever enumeration order
#: must be deterministic.
ACTION_ORDER = ("carry", "load", "unload", "seal", "unseal", "dump")


@dataclass(frozen=True)
class Action:
    """A fully ground action term, e.g. ``seal(oc,ol,ow)``."""

    name: str
    args: tuple[str, ...]

    def __post_init__(self) -> None:
        arity = ACTION_ARITY.get(self.name)
        if arity is None:
            raise ValueError(f"unknown action kind {self.name!r}")
        if len(self.args) != arity:
            raise ValueError(
                f"{self.name} takes {arity} argument(s), got {len(self.args)}"
            )

    def __str__(self) -> str:
        return f"{self.name}({','.join(self.args)})"

    def sort_key(self) -> tuple:
        return (ACTION_ORDER.index(self.name), self.args)


@dataclass(frozen=True)
class ActionPattern:
    """An action shape with optional wildcard slots (``None`` is a wildcard).

    A fully ground pattern matches exactly one action.
    """

    name: str
    args: tuple[Optional[str], ...]

    def __post_init__(self) -> None:
        arity = ACTION_ARITY.get(self.name)
        if arity is None:
            raise ValueError(f"unknown action kind {self.name!r}")
        if len(self.args) != arity:
            raise ValueError(
                f"{self.name} takes {arity} argument(s), got {len(self.args)}"
            )

    @classmethod
    def exact(cls, action: Action) -> "ActionPattern":
        return cls(action.name, action.args)

    def matches(self, action: Action) -> bool:
        if self.name != action.name:
            return False
        return all(
            slot is None or slot == got for slot, got in zip(self.args, action.args)
        )

    def subsumes(self, other: "ActionPattern") -> bool:
        """True when every ground action matching ``other`` also matches self."""
        if self.name != other.name:
            return False
        return all(
            mine is None or (theirs is not None and mine == theirs)
            for mine, theirs in zip(self.args, other.args)
        )

    def __str__(self) -> str:
        slots = ",".join("_" if a is None else a for a in self.args)
        return f"{self.name}({slots})"


def matches_pattern(action: Action, pattern: ActionPattern) -> bool:
    """Total check: same kind and every non-wildcard slot agrees."""
    return pattern.matches(action)


# ---------------------------------------------------------------------------
# Signature: declared objects, sorts, locations, component triples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComponentsTriple:
    """``components(container, lid, composite)``: the composite lidded
    container is assembled from the open container and the lid."""

    container: str
    lid: str
    composite: str

    def __str__(self) -> str:
        return f"components({self.container},{self.lid},{self.composite})"


@dataclass(frozen=True)
class Signature:
    sorts: dict[str, Sort]
    locations: frozenset[str]
    triples: tuple[ComponentsTriple, ...] = ()
    #: Ids introduced by a bounded-universe extension rather than declared in
    #: the source problem.  Metadata only; semantics are identical.
    fresh: frozenset[str] = frozenset()

    def sort_of(self, obj: str) -> Optional[Sort]:
        return self.sorts.get(obj)

    def is_object(self, name: str) -> bool:
        return name in self.sorts

    def is_location(self, name: str) -> bool:
        return name in self.locations

    def objects(self) -> list[str]:
        return list(self.sorts)

    def ordered_objects(self) -> list[str]:
        """Declared ids then fresh ids, each group lexicographic."""
        declared = sorted(o for o in self.sorts if o not in self.fresh)
        added = sorted(o for o in self.sorts if o in self.fresh)
        return declared + added

    def ordered_locations(self) -> list[str]:
        declared = sorted(l for l in self.locations if l not in self.fresh)
        added = sorted(l for l in self.locations if l in self.fresh)
        return declared + added

    def triple_for_composite(self, composite: str) -> Optional[ComponentsTriple]:
        for t in self.triples:
            if t.composite == composite:
                return t
        return None

    def triple_for_container(self, container: str) -> Optional[ComponentsTriple]:
        for t in self.triples:
            if t.container == container:
                return t
        return None

    def triple_for_lid(self, lid: str) -> Optional[ComponentsTriple]:
        for t in self.triples:
            if t.lid == lid:
                return t
        return None

    def problems(self) -> list[str]:
        """Structural defects: bad triple sorts, role reuse, id clashes."""
        out: list[str] = []
        overlap = set(self.sorts) & self.locations
        for name in sorted(overlap):
            out.append(f"{name!r} is declared both as an object and as a location")
        seen_roles: dict[tuple[str, str], str] = {}
        composites_seen: set[str] = set()
        for t in self.triples:
            expect = (
                (t.container, Sort.OPEN_CONTAINER, "open container"),
                (t.lid, Sort.LID, "lid"),
                (t.composite, Sort.CONTAINER_WITH_LID, "lidded container"),
            )
            for name, want, label in expect:
                got = self.sorts.get(name)
                if got is None:
                    out.append(f"components ref {name!r} is not a declared object")
                elif got is not want:
                    out.append(
                        f"components slot for {label} names {name!r}"
                        f" of sort {got.value}"
                    )
            for role, name in (("container", t.container), ("lid", t.lid)):
                key = (role, name)
                if key in seen_roles:
                    out.append(f"{name!r} appears as {role} in more than one"
                               " components triple")
                seen_roles[key] = name
            if t.composite in composites_seen:
                out.append(
                    f"{t.composite!r} appears as composite in more than one"
                    " components triple"
                )
            composites_seen.add(t.composite)
        for name, sort in self.sorts.items():
            if sort is Sort.CONTAINER_WITH_LID and name not in self.fresh:
                if self.triple_for_composite(name) is None:
                    out.append(f"lidded container {name!r} has no components triple")
        return out


def check_fluent(sig: Signature, fluent: Fluent) -> list[str]:
    return _check_slots(sig, fluent.name, FLUENT_SLOTS[fluent.name], fluent.args)


def check_action(sig: Signature, action: Action) -> list[str]:
    return _check_slots(sig, action.name, ACTION_SLOTS[action.name], action.args)


def check_pattern(sig: Signature, pattern: ActionPattern) -> list[str]:
    kinds = ACTION_SLOTS[pattern.name]
    out: list[str] = []
    for kind, arg in zip(kinds, pattern.args):
        if arg is None:
            continue
        out.extend(_check_slot(sig, pattern.name, kind, arg))
    return out


def _check_slots(
    sig: Signature, head: str, kinds: tuple[str, ...], args: tuple[str, ...]
) -> list[str]:
    out: list[str] = []
    for kind, arg in zip(kinds, args):
        out.extend(_check_slot(sig, head, kind, arg))
    return out


def _check_slot(sig: Signature, head: str, kind: str, arg: str) -> list[str]:
    if kind == "object":
        if not sig.is_object(arg):
            if sig.is_location(arg):
                return [f"{head}: {arg!r} is a location, expected an object"]
            return [f"{head}: undeclared object {arg!r}"]
    else:
        if not sig.is_location(arg):
            if sig.is_object(arg):
                return [f"{head}: {arg!r} is an object, expected a location"]
            return [f"{head}: undeclared location {arg!r}"]
    return []


# ---------------------------------------------------------------------------
# Time
# ---------------------------------------------------------------------------


class TimelineError(ValueError):
    pass


@dataclass(frozen=True)
class Timeline:
    """Named instants in a single chain; ``points[i]`` immediately precedes
    ``points[i+1]``.  Between consecutive named instants any number of
    unnamed events may occur."""

    points: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_index", {p: i for i, p in enumerate(self.points)}
        )
        if len(self._index) != len(self.points):
            raise TimelineError("duplicate time point in chain")

    @staticmethod
    def from_pairs(
        pairs: Iterable[tuple[str, str]], extra_points: Iterable[str] = ()
    ) -> "Timeline":
        """Assemble the chain from immediate-precedence pairs.

        ``extra_points`` are ids mentioned elsewhere that must sit on the
        chain.  Raises :class:`TimelineError` if the pairs do not form one
        chain covering every point.
        """
        pairs = list(dict.fromkeys(pairs))
        mentioned: dict[str, None] = {}
        for a, b in pairs:
            mentioned.setdefault(a)
            mentioned.setdefault(b)
        for p in extra_points:
            mentioned.setdefault(p)
        if not mentioned:
            raise TimelineError("no time points declared")
        succ: dict[str, str] = {}
        pred: dict[str, str] = {}
        for a, b in pairs:
            if a == b:
                raise TimelineError(f"time point {a!r} cannot precede itself")
            if a in succ:
                raise TimelineError(f"{a!r} has two immediate successors")
            if b in pred:
                raise TimelineError(f"{b!r} has two immediate predecessors")
            succ[a] = b
            pred[b] = a
        starts = [p for p in mentioned if p not in pred]
        if len(mentioned) > 1 and not pairs:
            raise TimelineError("time points are not ordered by any earlier facts")
        if not starts:
            raise TimelineError("earlier facts form a cycle")
        chain = [starts[0]]
        while chain[-1] in succ:
            nxt = succ[chain[-1]]
            if nxt in chain:
                raise TimelineError("earlier facts form a cycle")
            chain.append(nxt)
        if len(chain) != len(mentioned):
            loose = sorted(set(mentioned) - set(chain))
            raise TimelineError(
                "time points not connected into a single chain: "
                + ", ".join(loose)
            )
        return Timeline(tuple(chain))

    def __contains__(self, point: str) -> bool:
        return point in self._index

    def index_of(self, point: str) -> int:
        try:
            return self._index[point]
        except KeyError:
            raise TimelineError(f"unknown time point {point!r}") from None

    def precedes(self, t1: str, t2: str) -> bool:
        """Strict order: t1 is anywhere before t2 on the chain."""
        return self.index_of(t1) < self.index_of(t2)

    def precedes_eq(self, t1: str, t2: str) -> bool:
        return self.index_of(t1) <= self.index_of(t2)

    def predecessor(self, point: str) -> Optional[str]:
        i = self.index_of(point)
        return self.points[i - 1] if i > 0 else None

    def successor(self, point: str) -> Optional[str]:
        i = self.index_of(point)
        return self.points[i + 1] if i + 1 < len(self.points) else None


def precedes(timeline: Timeline, t1: str, t2: str) -> bool:
    return timeline.precedes(t1, t2)


# ---------------------------------------------------------------------------
# Occurrences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Occurrence:
    """A concrete event asserted to occur over ``[start, end]``."""

    start: str
    end: str
    action: Action

    def __str__(self) -> str:
        return f"occurs({self.start},{self.end},{self.action})"


@dataclass(frozen=True)
class NonOccurrence:
    """An assertion that no event matching ``pattern`` overlaps the interior
    of ``[start, end]``."""

    start: str
    end: str
    pattern: ActionPattern

    def __str__(self) -> str:
        return f"notOccurs({self.start},{self.end},{self.pattern})"


def all_ground_fluents(sig: Signature, include_unshielded: bool = True) -> list[Fluent]:
    """Every well-sorted ground fluent over the signature, in a fixed order."""
    objs = sig.ordered_objects()
    locs = sig.ordered_locations()
    out: list[Fluent] = []
    for o in objs:
        for l in locs:
            out.append(outside_at(o, l))
    for a in objs:
        for b in objs:
            if a != b:
                out.append(direct_contained(a, b))
    for a in objs:
        for b in objs:
            if a != b:
                out.append(contained(a, b))
    for o in objs:
        out.append(effective(o))
    for o in objs:
        out.append(ineffective(o))
    if include_unshielded:
        for a in objs:
            for b in objs:
                if a != b:
                    out.append(unshielded(a, b))
    return out
