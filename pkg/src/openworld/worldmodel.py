"""Declarative dynamics used by the proof engine.

Two tables describe how events interact with fluents:

* ``effect_rules_for`` instantiates, for a ground action, every conditional
  effect: if the action runs over ``[t1,t2]`` and all conditions hold at
  ``t1``, the goal holds at ``t2``.  Conditions are positive fluents only.

* ``threats_for`` lists, for a ground fluent, every action shape able to
  falsify it.  The list is deliberately complete (checked exhaustively
  against the operational simulator in the test suite): a fluent persists
  across a step when every threat is known not to occur, which is what
  licenses frame inferences in an open world.

Free placeholders in the effect table (the spilled object of a dump, the
location of an unload) are instantiated over the declared universe; effects
on unnamed objects are the simulator's concern, not the engine's.
"""

from __future__ import annotations

from dataclasses import dataclass

from .domain import (
    Action,
    ActionPattern,
    Fluent,
    Signature,
    Sort,
    contained,
    direct_contained,
    effective,
    ineffective,
    outside_at,
    unshielded,
)


@dataclass(frozen=True)
class EffectInstance:
    """One instantiated conditional effect of a concrete action."""

    goal: Fluent
    conditions: tuple[Fluent, ...]


def effect_rules_for(sig: Signature, action: Action) -> tuple[EffectInstance, ...]:
    """All instantiated (goal, conditions) effects of ``action``."""
    objs = sig.ordered_objects()
    locs = sig.ordered_locations()
    name = action.name
    out: list[EffectInstance] = []

    if name == "carry":
        o, l = action.args
        out.append(EffectInstance(outside_at(o, l), ()))

    elif name == "load":
        o, oc = action.args
        out.append(EffectInstance(direct_contained(o, oc), ()))
        out.append(EffectInstance(contained(o, oc), ()))
        for x in objs:
            if x in (o, oc):
                continue
            out.append(EffectInstance(contained(x, oc), (contained(x, o),)))

    elif name == "unload":
        o, oc = action.args
        for l in locs:
            out.append(EffectInstance(outside_at(o, l), (outside_at(oc, l),)))

    elif name == "seal":
        oc, ol, ow = action.args
        out.append(EffectInstance(effective(ow), ()))
        out.append(EffectInstance(ineffective(oc), ()))
        out.append(EffectInstance(ineffective(ol), ()))
        for x in objs:
            if x in (oc, ol, ow):
                continue
            out.append(EffectInstance(contained(x, ow), (contained(x, oc),)))
        for l in locs:
            out.append(EffectInstance(outside_at(ow, l), (outside_at(oc, l),)))

    elif name == "unseal":
        ow, ol, oc = action.args
        out.append(EffectInstance(effective(oc), ()))
        out.append(EffectInstance(effective(ol), ()))
        out.append(EffectInstance(ineffective(ow), ()))
        for l in locs:
            out.append(EffectInstance(outside_at(oc, l), (outside_at(ow, l),)))
            out.append(EffectInstance(outside_at(ol, l), (outside_at(ow, l),)))
        # Containment in the component container needs no effect here: it
        # persisted untouched through the sealed period.

    elif name == "dump":
        (o,) = action.args
        # Unshielded contents land on the ground at the dump site.
        for x in objs:
            if x == o:
                continue
            for l in locs:
                out.append(
                    EffectInstance(
                        outside_at(x, l),
                        (contained(x, o), unshielded(x, o), outside_at(o, l)),
                    )
                )
        # Shielded contents end up directly inside the boundary they cannot
        # cross: a closed container, or the open component of a lidded one.
        barriers: list[tuple[str, tuple[Fluent, ...]]] = []
        for b in objs:
            sort = sig.sort_of(b)
            if sort is Sort.CLOSED_CONTAINER:
                barriers.append((b, ()))
            elif sort is Sort.OPEN_CONTAINER:
                triple = sig.triple_for_container(b)
                if triple is not None:
                    barriers.append((b, (effective(triple.composite),)))
        for b, guard in barriers:
            for x in objs:
                if x in (b, o):
                    continue
                out.append(
                    EffectInstance(direct_contained(x, b),
                                   (direct_contained(x, b),) + guard)
                )
                for c in objs:
                    if c in (x, b):
                        continue
                    out.append(
                        EffectInstance(
                            direct_contained(x, b),
                            (contained(x, o), unshielded(x, c),
                             direct_contained(c, b)) + guard,
                        )
                    )

    else:  # pragma: no cover - Action constructor rejects unknown kinds
        raise ValueError(f"unknown action kind {name!r}")

    return tuple(out)


def threats_for(sig: Signature, fluent: Fluent) -> tuple[ActionPattern, ...]:
    """Every action shape that can falsify ``fluent``.

    The entry for a fluent over a closed container is empty: closed-container
    contents are the one state of affairs no event can reach.
    """
    name = fluent.name
    if name == "unshielded":
        raise ValueError("unshielded is derived and has no threat entries")

    if name == "outsideAt":
        o, _ = fluent.args
        pats = [
            ActionPattern("carry", (o, None)),
            ActionPattern("load", (o, None)),
            ActionPattern("seal", (o, None, None)),
            ActionPattern("seal", (None, o, None)),
        ]
        if sig.sort_of(o) is Sort.CONTAINER_WITH_LID:
            # Taking the composite apart removes it as a placed object.
            pats.append(ActionPattern("unseal", (o, None, None)))
        return tuple(pats)

    if name == "directContained":
        a, c = fluent.args
        if sig.sort_of(c) is Sort.CLOSED_CONTAINER:
            return ()
        return (
            ActionPattern("unload", (a, c)),
            ActionPattern("dump", (None,)),
        )

    if name == "contained":
        a, c = fluent.args
        sort = sig.sort_of(c)
        if sort is Sort.CONTAINER_WITH_LID:
            return (ActionPattern("unseal", (c, None, None)),)
        if sort is Sort.CLOSED_CONTAINER:
            return ()
        return (
            ActionPattern("unload", (a, c)),
            ActionPattern("unload", (None, c)),
            ActionPattern("dump", (None,)),
        )

    if name == "effective":
        (o,) = fluent.args
        return (
            ActionPattern("seal", (o, None, None)),
            ActionPattern("seal", (None, o, None)),
            ActionPattern("unseal", (o, None, None)),
        )

    if name == "ineffective":
        (o,) = fluent.args
        return (
            ActionPattern("seal", (None, None, o)),
            ActionPattern("unseal", (None, o, None)),
            ActionPattern("unseal", (None, None, o)),
        )

    raise ValueError(f"unknown fluent kind {name!r}")  # pragma: no cover
