"""Open-world proof engine: recursive backward chaining through time.

A goal ``holds(t, q)`` is proved by one of:

* a given fact;
* a conditional effect of an asserted event ending exactly at ``t``, with
  every condition proved at the event's start;
* persistence from the immediately preceding instant, licensed either by an
  asserted event spanning the step that threatens nothing (the step can hold
  no other event) or by non-occurrence assertions covering every threat;
* containment closure at ``t`` (one direct step plus containment, or the
  lift of a component's contents to its assembled composite);
* a barrier-free direct-containment chain, for derived ``unshielded`` goals.

The verdict is two-valued: a proof, or ``None`` meaning *unknown*.  Failure
to prove never asserts falsity; in an open world the unstated may still be
true.  Every proof is a checkable tree; ``check_proof`` revalidates one
against the problem and the rule tables without re-running the search.

Each query owns a private memo table (both proofs and failures are cached
per ground goal); goals already on the call stack fail that path, which cuts
cycles through the containment closure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .domain import (
    Action,
    ActionPattern,
    Fluent,
    NonOccurrence,
    Occurrence,
    Signature,
    Sort,
    TimelineError,
    check_fluent,
    contained,
    direct_contained,
    effective,
    ineffective,
    matches_pattern,
)
from .specdsl import ProblemSpec
from .worldmodel import EffectInstance, effect_rules_for, threats_for


# ---------------------------------------------------------------------------
# Proof trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Given:
    pass


@dataclass(frozen=True)
class ByEffect:
    occurrence: Occurrence
    instance: EffectInstance


@dataclass(frozen=True)
class KnownOccurrence:
    """Persistence case: an asserted event spans the step and threatens
    nothing; by non-overlap it is the only event inside the step."""

    occurrence: Occurrence


@dataclass(frozen=True)
class ExcludedThreat:
    threat: ActionPattern
    cited: NonOccurrence


@dataclass(frozen=True)
class ExcludedThreats:
    """Persistence case: every threat is covered by an asserted
    non-occurrence subsuming it over the step."""

    pairs: tuple[ExcludedThreat, ...]


@dataclass(frozen=True)
class ByPersistence:
    start: str
    case: Union[KnownOccurrence, ExcludedThreats]


@dataclass(frozen=True)
class ByClosure:
    step: str  # "direct" | "chain" | "lift"
    via: Optional[str] = None  # intermediate object for "chain"


@dataclass(frozen=True)
class ByChain:
    """Derivation of unshielded(x, o): the containers climbed from x up to
    and including o, none of which is a barrier."""

    containers: tuple[str, ...]


Rule = Union[Given, ByEffect, ByPersistence, ByClosure, ByChain]


@dataclass(frozen=True)
class ProofNode:
    time: str
    goal: Fluent
    rule: Rule
    children: tuple["ProofNode", ...] = ()


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class InferenceEngine:
    """Prover over one validated problem.  The problem and derived indexes
    are immutable and shareable; each ``infer`` call owns its own memo."""

    def __init__(self, spec: ProblemSpec):
        if spec.timeline is None:
            raise ValueError("problem must validate before inference")
        self.spec = spec
        self.sig: Signature = spec.signature
        self.timeline = spec.timeline
        self._holds = frozenset(spec.holds_facts)
        self._occ_end: dict[str, list[Occurrence]] = {}
        for occ in spec.occurrences:
            self._occ_end.setdefault(occ.end, []).append(occ)
        self._cover: dict[tuple[str, str], list[Occurrence]] = {}
        pts = self.timeline.points
        for ta, tb in zip(pts, pts[1:]):
            covering = [
                occ
                for occ in spec.occurrences
                if self.timeline.precedes_eq(occ.start, ta)
                and self.timeline.precedes_eq(tb, occ.end)
            ]
            self._cover[(ta, tb)] = covering
        self._threat_cache: dict[Fluent, tuple[ActionPattern, ...]] = {}
        self._effect_cache: dict[Action, tuple[EffectInstance, ...]] = {}

    # -- cached tables -------------------------------------------------

    def threats_for(self, q: Fluent) -> tuple[ActionPattern, ...]:
        got = self._threat_cache.get(q)
        if got is None:
            got = threats_for(self.sig, q)
            self._threat_cache[q] = got
        return got

    def effects_for(self, action: Action) -> tuple[EffectInstance, ...]:
        got = self._effect_cache.get(action)
        if got is None:
            got = effect_rules_for(self.sig, action)
            self._effect_cache[action] = got
        return got

    # -- public operations ----------------------------------------------

    def infer(self, t: str, q: Fluent) -> Optional[ProofNode]:
        """Prove ``holds(t, q)`` or return None (unknown, not false)."""
        self.timeline.index_of(t)  # raises TimelineError for unknown points
        problems = check_fluent(self.sig, q)
        if problems:
            raise ValueError("; ".join(problems))
        return self._prove(t, q, {}, set())

    def not_occurs_entails(self, ta: str, tb: str, p: ActionPattern) -> bool:
        return self._entailing_assertion(ta, tb, p) is not None

    def occurs_within_known(self, ta: str, tb: str, p: ActionPattern) -> bool:
        """A known (asserted) occurrence matching ``p`` overlaps the
        interior of ``[ta, tb]``.  False only means no *known* overlap."""
        if not self.timeline.precedes(ta, tb):
            raise ValueError(f"{ta!r} does not precede {tb!r}")
        return any(
            matches_pattern(occ.action, p)
            and self.timeline.precedes(occ.start, tb)
            and self.timeline.precedes(ta, occ.end)
            for occ in self.spec.occurrences
        )

    def persistence_case(
        self, ta: str, tb: str, q: Fluent
    ) -> Optional[Union[KnownOccurrence, ExcludedThreats]]:
        """Justification that ``q`` carries over the step ``ta -> tb``, or
        None when the open world leaves room for a falsifying event."""
        if self.timeline.successor(ta) != tb:
            raise ValueError(f"{ta!r} does not immediately precede {tb!r}")
        if q.name == "unshielded":
            raise ValueError("unshielded has no threat entries")
        threats = self.threats_for(q)
        for occ in self._cover[(ta, tb)]:
            if not any(p.matches(occ.action) for p in threats):
                return KnownOccurrence(occ)
        pairs: list[ExcludedThreat] = []
        for p in threats:
            cited = self._entailing_assertion(ta, tb, p)
            if cited is None:
                return None
            pairs.append(ExcludedThreat(p, cited))
        return ExcludedThreats(tuple(pairs))

    # -- internals -------------------------------------------------------

    def _entailing_assertion(
        self, ta: str, tb: str, p: ActionPattern
    ) -> Optional[NonOccurrence]:
        if not self.timeline.precedes(ta, tb):
            raise ValueError(f"{ta!r} does not precede {tb!r}")
        for non in self.spec.non_occurrences:
            if (
                self.timeline.precedes_eq(non.start, ta)
                and self.timeline.precedes_eq(tb, non.end)
                and non.pattern.subsumes(p)
            ):
                return non
        return None

    def _prove(
        self,
        t: str,
        q: Fluent,
        memo: dict[tuple[str, Fluent], Optional[ProofNode]],
        stack: set[tuple[str, Fluent]],
    ) -> Optional[ProofNode]:
        key = (t, q)
        if key in memo:
            return memo[key]
        if key in stack:
            return None
        stack.add(key)
        try:
            node = (
                self._given(t, q)
                or self._by_effect(t, q, memo, stack)
                or self._by_persistence(t, q, memo, stack)
                or self._by_closure(t, q, memo, stack)
                or self._by_chain(t, q, memo, stack)
            )
        finally:
            stack.discard(key)
        memo[key] = node
        return node

    def _given(self, t: str, q: Fluent) -> Optional[ProofNode]:
        if (t, q) in self._holds:
            return ProofNode(t, q, Given())
        return None

    def _by_effect(self, t, q, memo, stack) -> Optional[ProofNode]:
        for occ in self._occ_end.get(t, ()):
            for inst in self.effects_for(occ.action):
                if inst.goal != q:
                    continue
                children: list[ProofNode] = []
                for cond in inst.conditions:
                    sub = self._prove(occ.start, cond, memo, stack)
                    if sub is None:
                        break
                    children.append(sub)
                else:
                    return ProofNode(t, q, ByEffect(occ, inst), tuple(children))
        return None

    def _by_persistence(self, t, q, memo, stack) -> Optional[ProofNode]:
        if q.name == "unshielded":
            return None
        ta = self.timeline.predecessor(t)
        if ta is None:
            return None
        sub = self._prove(ta, q, memo, stack)
        if sub is None:
            return None
        case = self.persistence_case(ta, t, q)
        if case is None:
            return None
        return ProofNode(t, q, ByPersistence(ta, case), (sub,))

    def _by_closure(self, t, q, memo, stack) -> Optional[ProofNode]:
        if q.name != "contained":
            return None
        x, y = q.args
        direct = self._prove(t, direct_contained(x, y), memo, stack)
        if direct is not None:
            return ProofNode(t, q, ByClosure("direct"), (direct,))
        for mid in self.sig.ordered_objects():
            if mid == x or mid == y:
                continue
            edge = self._prove(t, direct_contained(x, mid), memo, stack)
            if edge is None:
                continue
            rest = self._prove(t, contained(mid, y), memo, stack)
            if rest is None:
                continue
            return ProofNode(t, q, ByClosure("chain", mid), (edge, rest))
        if self.sig.sort_of(y) is Sort.CONTAINER_WITH_LID:
            triple = self.sig.triple_for_composite(y)
            if triple is not None:
                inner = self._prove(t, contained(x, triple.container), memo, stack)
                if inner is not None:
                    live = self._prove(t, effective(y), memo, stack)
                    if live is not None:
                        return ProofNode(t, q, ByClosure("lift"), (inner, live))
        return None

    def _chain_obligations(
        self, node: str
    ) -> Optional[list[Fluent]]:
        """What must hold for ``node`` not to be a barrier; None when it is
        a barrier outright."""
        sort = self.sig.sort_of(node)
        if sort is Sort.CLOSED_CONTAINER:
            return None
        if sort is Sort.OPEN_CONTAINER:
            triple = self.sig.triple_for_container(node)
            if triple is not None:
                return [ineffective(triple.composite)]
            return []
        if sort is Sort.CONTAINER_WITH_LID:
            return [ineffective(node)]
        return []

    def _by_chain(self, t, q, memo, stack) -> Optional[ProofNode]:
        if q.name != "unshielded":
            return None
        x, o = q.args
        if x == o:
            return None

        def extend(
            cur: str,
            chain: tuple[str, ...],
            proofs: tuple[ProofNode, ...],
            visited: frozenset[str],
        ) -> Optional[ProofNode]:
            for nxt in self.sig.ordered_objects():
                if nxt in visited:
                    continue
                edge = self._prove(t, direct_contained(cur, nxt), memo, stack)
                if edge is None:
                    continue
                obligations = self._chain_obligations(nxt)
                if obligations is None:
                    continue
                ob_proofs: list[ProofNode] = []
                for ob in obligations:
                    sub = self._prove(t, ob, memo, stack)
                    if sub is None:
                        break
                    ob_proofs.append(sub)
                else:
                    new_chain = chain + (nxt,)
                    new_proofs = proofs + (edge,) + tuple(ob_proofs)
                    if nxt == o:
                        return ProofNode(t, q, ByChain(new_chain), new_proofs)
                    deeper = extend(
                        nxt, new_chain, new_proofs, visited | {nxt}
                    )
                    if deeper is not None:
                        return deeper
            return None

        return extend(x, (), (), frozenset({x}))


# ---------------------------------------------------------------------------
# Module-level conveniences
# ---------------------------------------------------------------------------


def infer(spec: ProblemSpec, t: str, q: Fluent) -> Optional[ProofNode]:
    return InferenceEngine(spec).infer(t, q)


def persists(
    spec: ProblemSpec, ta: str, tb: str, q: Fluent
) -> Optional[Union[KnownOccurrence, ExcludedThreats]]:
    return InferenceEngine(spec).persistence_case(ta, tb, q)


def not_occurs_entails(
    spec: ProblemSpec, ta: str, tb: str, p: ActionPattern
) -> bool:
    return InferenceEngine(spec).not_occurs_entails(ta, tb, p)


def occurs_within_known(
    spec: ProblemSpec, ta: str, tb: str, p: ActionPattern
) -> bool:
    return InferenceEngine(spec).occurs_within_known(ta, tb, p)


# ---------------------------------------------------------------------------
# Independent proof checking
# ---------------------------------------------------------------------------


def check_proof(spec: ProblemSpec, proof: ProofNode) -> bool:
    """Validate every node of ``proof`` against the problem and the rule
    tables, without searching.  A tampered tree fails."""
    try:
        engine = InferenceEngine(spec)
    except ValueError:
        return False
    try:
        return _check_node(engine, proof)
    except (ValueError, TimelineError):
        return False


def _check_node(eng: InferenceEngine, node: ProofNode) -> bool:
    if check_fluent(eng.sig, node.goal):
        return False
    if node.time not in eng.timeline:
        return False
    rule = node.rule

    if isinstance(rule, Given):
        return not node.children and (node.time, node.goal) in eng._holds

    if isinstance(rule, ByEffect):
        occ = rule.occurrence
        if occ not in eng.spec.occurrences or occ.end != node.time:
            return False
        if rule.instance not in eng.effects_for(occ.action):
            return False
        if rule.instance.goal != node.goal:
            return False
        conds = rule.instance.conditions
        if len(node.children) != len(conds):
            return False
        for child, cond in zip(node.children, conds):
            if child.time != occ.start or child.goal != cond:
                return False
            if not _check_node(eng, child):
                return False
        return True

    if isinstance(rule, ByPersistence):
        if eng.timeline.predecessor(node.time) != rule.start:
            return False
        if len(node.children) != 1:
            return False
        child = node.children[0]
        if child.time != rule.start or child.goal != node.goal:
            return False
        if not _check_node(eng, child):
            return False
        if node.goal.name == "unshielded":
            return False
        threats = eng.threats_for(node.goal)
        case = rule.case
        if isinstance(case, KnownOccurrence):
            occ = case.occurrence
            if occ not in eng.spec.occurrences:
                return False
            if not (
                eng.timeline.precedes_eq(occ.start, rule.start)
                and eng.timeline.precedes_eq(node.time, occ.end)
            ):
                return False
            return not any(p.matches(occ.action) for p in threats)
        if isinstance(case, ExcludedThreats):
            if tuple(pair.threat for pair in case.pairs) != threats:
                return False
            for pair in case.pairs:
                non = pair.cited
                if non not in eng.spec.non_occurrences:
                    return False
                if not (
                    eng.timeline.precedes_eq(non.start, rule.start)
                    and eng.timeline.precedes_eq(node.time, non.end)
                ):
                    return False
                if not non.pattern.subsumes(pair.threat):
                    return False
            return True
        return False

    if isinstance(rule, ByClosure):
        if node.goal.name != "contained":
            return False
        x, y = node.goal.args
        kids = node.children
        if rule.step == "direct":
            if len(kids) != 1 or rule.via is not None:
                return False
            (edge,) = kids
            if edge.time != node.time or edge.goal != direct_contained(x, y):
                return False
            return _check_node(eng, edge)
        if rule.step == "chain":
            mid = rule.via
            if mid is None or mid in (x, y) or len(kids) != 2:
                return False
            edge, rest = kids
            if edge.time != node.time or edge.goal != direct_contained(x, mid):
                return False
            if rest.time != node.time or rest.goal != contained(mid, y):
                return False
            return _check_node(eng, edge) and _check_node(eng, rest)
        if rule.step == "lift":
            if eng.sig.sort_of(y) is not Sort.CONTAINER_WITH_LID:
                return False
            triple = eng.sig.triple_for_composite(y)
            if triple is None or len(kids) != 2:
                return False
            inner, live = kids
            if inner.time != node.time or inner.goal != contained(
                x, triple.container
            ):
                return False
            if live.time != node.time or live.goal != effective(y):
                return False
            return _check_node(eng, inner) and _check_node(eng, live)
        return False

    if isinstance(rule, ByChain):
        if node.goal.name != "unshielded":
            return False
        x, o = node.goal.args
        chain = rule.containers
        if not chain or chain[-1] != o:
            return False
        if len(set(chain) | {x}) != len(chain) + 1:
            return False
        expected: list[Fluent] = []
        prev = x
        for c in chain:
            expected.append(direct_contained(prev, c))
            obligations = eng._chain_obligations(c)
            if obligations is None:
                return False
            expected.extend(obligations)
            prev = c
        if len(node.children) != len(expected):
            return False
        for child, goal in zip(node.children, expected):
            if child.time != node.time or child.goal != goal:
                return False
            if not _check_node(eng, child):
                return False
        return True

    return False
