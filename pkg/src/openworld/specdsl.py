"""Textual problem-statement language (``.ow`` files).

A problem is a list of period-terminated facts::

    block(oa). openContainer(oc). lid(ol). containerWithLid(ow).
    components(oc,ol,ow).  location(la).
    earlier(t0,t1). earlier(t1,t2).
    holds(t0,outsideAt(oa,la)).
    occurs(t0,t1,load(oa,oc)).
    notOccurs(t1,t2,unseal(ow,_,_)).

Identifiers are ``[a-z][a-zA-Z0-9]*``; ``%`` starts a comment running to end
of line; ``_`` is a wildcard slot, legal only inside ``notOccurs`` action
patterns.  Universally quantified non-occurrence ("o is not loaded into
anything") is written with wildcards: ``load(o,_)``, ``unseal(ow,_,_)``.

A ``fresh`` prefix before a sort or location declaration marks ids invented
by the bounded-completion search; serialized witness worlds use it so that a
falsifying world is itself a loadable problem.

The parser never raises on malformed input: it collects diagnostics with
line/column positions and recovers at the next period.  ``validate_spec``
performs the semantic checks (single time chain, non-overlapping
occurrences, occurrence/non-occurrence consistency, fact sanity).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .domain import (
    ACTION_ARITY,
    ASSERTABLE_FLUENTS,
    FLUENT_ARITY,
    Action,
    ActionPattern,
    ComponentsTriple,
    Fluent,
    NonOccurrence,
    Occurrence,
    Signature,
    Sort,
    Timeline,
    TimelineError,
    check_action,
    check_fluent,
    check_pattern,
    matches_pattern,
)

SORT_HEADS = {s.value: s for s in Sort}
STATEMENT_HEADS = set(SORT_HEADS) | {
    "components",
    "location",
    "earlier",
    "holds",
    "occurs",
    "notOccurs",
}


class SpecError(ValueError):
    """Raised by the strict loading helpers when a problem does not parse
    or does not validate."""


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


@dataclass(frozen=True)
class ProblemSpec:
    """A parsed problem: signature, time chain, given facts, event record
    and non-occurrence assertions.  Facts are stored in canonical order so
    that two parses of equivalent text compare equal."""

    signature: Signature
    time_points: tuple[str, ...]
    earlier_pairs: tuple[tuple[str, str], ...]
    holds_facts: tuple[tuple[str, Fluent], ...]
    occurrences: tuple[Occurrence, ...]
    non_occurrences: tuple[NonOccurrence, ...]
    timeline: Optional[Timeline] = None

    @staticmethod
    def assemble(
        signature: Signature,
        earlier_pairs: Iterable[tuple[str, str]],
        holds_facts: Iterable[tuple[str, Fluent]],
        occurrences: Iterable[Occurrence],
        non_occurrences: Iterable[NonOccurrence],
        extra_time_points: Iterable[str] = (),
    ) -> "ProblemSpec":
        pairs = tuple(dict.fromkeys(earlier_pairs))
        mentioned: dict[str, None] = {}
        for a, b in pairs:
            mentioned.setdefault(a)
            mentioned.setdefault(b)
        holds = tuple(dict.fromkeys(holds_facts))
        occs = tuple(dict.fromkeys(occurrences))
        nons = tuple(dict.fromkeys(non_occurrences))
        for t, _ in holds:
            mentioned.setdefault(t)
        for o in occs:
            mentioned.setdefault(o.start)
            mentioned.setdefault(o.end)
        for n in nons:
            mentioned.setdefault(n.start)
            mentioned.setdefault(n.end)
        for t in extra_time_points:
            mentioned.setdefault(t)
        try:
            timeline = Timeline.from_pairs(pairs, mentioned)
        except TimelineError:
            timeline = None

        def tkey(t: str) -> tuple:
            if timeline is not None and t in timeline:
                return (0, timeline.index_of(t))
            return (1, t)

        holds = tuple(sorted(holds, key=lambda h: (tkey(h[0]), str(h[1]))))
        occs = tuple(sorted(occs, key=lambda o: (tkey(o.start), tkey(o.end), str(o))))
        nons = tuple(sorted(nons, key=lambda n: (tkey(n.start), tkey(n.end), str(n))))
        return ProblemSpec(
            signature=signature,
            time_points=tuple(mentioned),
            earlier_pairs=pairs,
            holds_facts=holds,
            occurrences=occs,
            non_occurrences=nons,
            timeline=timeline,
        )


@dataclass
class ParseResult:
    spec: Optional[ProblemSpec]
    diagnostics: list[Diagnostic]
    #: Source position of each fact, keyed by its canonical rendering.
    positions: dict[str, tuple[int, int]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.spec is not None


@dataclass(frozen=True)
class ValidationReport:
    diagnostics: tuple[Diagnostic, ...]

    @property
    def valid(self) -> bool:
        return not any(d.severity == "error" for d in self.diagnostics)

    def errors(self) -> list[str]:
        return [d.message for d in self.diagnostics if d.severity == "error"]


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT WILDCARD LPAREN RPAREN COMMA PERIOD BAD EOF
    text: str
    line: int
    column: int


_PUNCT = {"(": "LPAREN", ")": "RPAREN", ",": "COMMA", ".": "PERIOD"}


def _lex(text: str) -> tuple[list[_Token], list[Diagnostic]]:
    tokens: list[_Token] = []
    diags: list[Diagnostic] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            col += 1
            i += 1
            continue
        if c == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c in _PUNCT:
            tokens.append(_Token(_PUNCT[c], c, line, col))
            col += 1
            i += 1
            continue
        if c == "_":
            tokens.append(_Token("WILDCARD", c, line, col))
            col += 1
            i += 1
            continue
        if "a" <= c <= "z":
            j = i + 1
            while j < n and (text[j].isalnum()):
                j += 1
            word = text[i:j]
            tokens.append(_Token("IDENT", word, line, col))
            col += j - i
            i = j
            continue
        diags.append(Diagnostic("error", line, col, f"unexpected character {c!r}"))
        tokens.append(_Token("BAD", c, line, col))
        col += 1
        i += 1
    tokens.append(_Token("EOF", "", line, col))
    return tokens, diags


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Term:
    """name(args) or a bare name; wildcard is name='_'. Nested one level."""

    name: str
    args: tuple["_Term", ...]
    line: int
    column: int

    @property
    def is_wildcard(self) -> bool:
        return self.name == "_"

    @property
    def is_atom(self) -> bool:
        return not self.args


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0
        self.diags: list[Diagnostic] = []

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def error(self, tok: _Token, message: str) -> None:
        self.diags.append(Diagnostic("error", tok.line, tok.column, message))

    def recover(self) -> None:
        while self.peek().kind not in ("PERIOD", "EOF"):
            self.advance()
        if self.peek().kind == "PERIOD":
            self.advance()

    def statements(self) -> list[tuple[bool, _Term]]:
        """Yields (fresh_flag, term) per successfully parsed statement."""
        out: list[tuple[bool, _Term]] = []
        while self.peek().kind != "EOF":
            tok = self.peek()
            if tok.kind == "PERIOD":
                self.error(tok, "empty statement")
                self.advance()
                continue
            fresh = False
            if tok.kind == "IDENT" and tok.text == "fresh":
                fresh = True
                self.advance()
            term = self.term()
            if term is None:
                self.recover()
                continue
            end = self.peek()
            if end.kind != "PERIOD":
                self.error(end, f"expected '.' after statement, got {end.text!r}")
                self.recover()
                continue
            self.advance()
            out.append((fresh, term))
        return out

    def term(self) -> Optional[_Term]:
        tok = self.peek()
        if tok.kind == "WILDCARD":
            self.advance()
            return _Term("_", (), tok.line, tok.column)
        if tok.kind != "IDENT":
            self.error(tok, f"expected an identifier, got {tok.text!r}")
            return None
        self.advance()
        if self.peek().kind != "LPAREN":
            return _Term(tok.text, (), tok.line, tok.column)
        self.advance()
        args: list[_Term] = []
        if self.peek().kind == "RPAREN":
            self.error(self.peek(), "empty argument list")
            self.advance()
            return None
        while True:
            arg = self.term()
            if arg is None:
                return None
            args.append(arg)
            nxt = self.peek()
            if nxt.kind == "COMMA":
                self.advance()
                continue
            if nxt.kind == "RPAREN":
                self.advance()
                return _Term(tok.text, tuple(args), tok.line, tok.column)
            self.error(nxt, f"expected ',' or ')', got {nxt.text!r}")
            return None


class _Builder:
    """Interprets parsed statements and accumulates spec pieces."""

    def __init__(self) -> None:
        self.diags: list[Diagnostic] = []
        self.sorts: dict[str, Sort] = {}
        self.sort_lines: dict[str, tuple[int, int]] = {}
        self.locations: dict[str, None] = {}
        self.triples: dict[ComponentsTriple, None] = {}
        self.fresh: set[str] = set()
        self.earlier: dict[tuple[str, str], None] = {}
        self.holds: dict[tuple[str, Fluent], None] = {}
        self.occurrences: dict[Occurrence, None] = {}
        self.non_occurrences: dict[NonOccurrence, None] = {}
        self.positions: dict[str, tuple[int, int]] = {}

    def error(self, term: _Term, message: str) -> None:
        self.diags.append(Diagnostic("error", term.line, term.column, message))

    def warn(self, term: _Term, message: str) -> None:
        self.diags.append(Diagnostic("warning", term.line, term.column, message))

    def dup(self, term: _Term, rendered: str) -> None:
        self.warn(term, f"duplicate fact {rendered} merged")

    def atom(self, term: _Term, what: str) -> Optional[str]:
        if term.is_wildcard:
            self.error(term, f"wildcard not allowed in {what}")
            return None
        if not term.is_atom:
            self.error(term, f"{what} must be a plain identifier")
            return None
        return term.name

    def atoms(self, term: _Term, what: str) -> Optional[list[str]]:
        out: list[str] = []
        for arg in term.args:
            name = self.atom(arg, what)
            if name is None:
                return None
            out.append(name)
        return out

    def statement(self, fresh: bool, term: _Term) -> None:
        head = term.name
        if fresh and head not in SORT_HEADS and head != "location":
            self.error(term, "'fresh' applies only to sort and location"
                             " declarations")
            return
        if head in SORT_HEADS:
            self.declare_sort(term, SORT_HEADS[head], fresh)
        elif head == "location":
            self.declare_location(term, fresh)
        elif head == "components":
            self.declare_components(term)
        elif head == "earlier":
            self.declare_earlier(term)
        elif head == "holds":
            self.declare_holds(term)
        elif head == "occurs":
            self.declare_occurs(term)
        elif head == "notOccurs":
            self.declare_not_occurs(term)
        else:
            self.error(term, f"unknown statement head {head!r}")

    def declare_sort(self, term: _Term, sort: Sort, fresh: bool) -> None:
        if len(term.args) != 1:
            self.error(term, f"{sort.value} declares exactly one object")
            return
        name = self.atom(term.args[0], "an object declaration")
        if name is None:
            return
        prior = self.sorts.get(name)
        if prior is not None:
            if prior is sort:
                self.dup(term, f"{sort.value}({name})")
            else:
                self.error(
                    term,
                    f"duplicate sort declaration: {name!r} already declared"
                    f" as {prior.value}",
                )
            return
        self.sorts[name] = sort
        self.sort_lines[name] = (term.line, term.column)
        if fresh:
            self.fresh.add(name)

    def declare_location(self, term: _Term, fresh: bool) -> None:
        if len(term.args) != 1:
            self.error(term, "location declares exactly one id")
            return
        name = self.atom(term.args[0], "a location declaration")
        if name is None:
            return
        if name in self.locations:
            self.dup(term, f"location({name})")
            return
        self.locations[name] = None
        if fresh:
            self.fresh.add(name)

    def declare_components(self, term: _Term) -> None:
        if len(term.args) != 3:
            self.error(term, "components takes three objects")
            return
        names = self.atoms(term, "a components declaration")
        if names is None:
            return
        triple = ComponentsTriple(names[0], names[1], names[2])
        if triple in self.triples:
            self.dup(term, str(triple))
            return
        self.triples[triple] = None
        self.positions[str(triple)] = (term.line, term.column)

    def declare_earlier(self, term: _Term) -> None:
        if len(term.args) != 2:
            self.error(term, "earlier takes two time points")
            return
        names = self.atoms(term, "an earlier fact")
        if names is None:
            return
        pair = (names[0], names[1])
        if pair in self.earlier:
            self.dup(term, f"earlier({pair[0]},{pair[1]})")
            return
        self.earlier[pair] = None
        self.positions[f"earlier({pair[0]},{pair[1]})"] = (term.line, term.column)

    def fluent(self, term: _Term, allow_unshielded: bool) -> Optional[Fluent]:
        if term.is_wildcard or term.is_atom:
            self.error(term, "expected a fluent term")
            return None
        arity = FLUENT_ARITY.get(term.name)
        if arity is None:
            self.error(term, f"unknown fluent kind {term.name!r}")
            return None
        if term.name not in ASSERTABLE_FLUENTS and not allow_unshielded:
            self.error(term, f"{term.name} is derived and cannot be asserted")
            return None
        if len(term.args) != arity:
            self.error(
                term, f"{term.name} takes {arity} argument(s), got {len(term.args)}"
            )
            return None
        names = self.atoms(term, f"a {term.name} fluent")
        if names is None:
            return None
        return Fluent(term.name, tuple(names))

    def action(self, term: _Term) -> Optional[Action]:
        if term.is_wildcard or term.is_atom:
            self.error(term, "expected an action term")
            return None
        arity = ACTION_ARITY.get(term.name)
        if arity is None:
            self.error(term, f"unknown action kind {term.name!r}")
            return None
        if len(term.args) != arity:
            self.error(
                term, f"{term.name} takes {arity} argument(s), got {len(term.args)}"
            )
            return None
        names = self.atoms(term, f"a {term.name} action")
        if names is None:
            return None
        return Action(term.name, tuple(names))

    def pattern(self, term: _Term) -> Optional[ActionPattern]:
        if term.is_wildcard or term.is_atom:
            self.error(term, "expected an action pattern")
            return None
        arity = ACTION_ARITY.get(term.name)
        if arity is None:
            self.error(term, f"unknown action kind {term.name!r}")
            return None
        if len(term.args) != arity:
            self.error(
                term, f"{term.name} takes {arity} argument(s), got {len(term.args)}"
            )
            return None
        slots: list[Optional[str]] = []
        for arg in term.args:
            if arg.is_wildcard:
                slots.append(None)
                continue
            if not arg.is_atom:
                self.error(arg, "pattern slots are identifiers or '_'")
                return None
            slots.append(arg.name)
        return ActionPattern(term.name, tuple(slots))

    def declare_holds(self, term: _Term) -> None:
        if len(term.args) != 2:
            self.error(term, "holds takes a time point and a fluent")
            return
        t = self.atom(term.args[0], "a time point")
        if t is None:
            return
        fl = self.fluent(term.args[1], allow_unshielded=True)
        if fl is None:
            return
        key = (t, fl)
        if key in self.holds:
            self.dup(term, f"holds({t},{fl})")
            return
        self.holds[key] = None
        self.positions[f"holds({t},{fl})"] = (term.line, term.column)

    def declare_occurs(self, term: _Term) -> None:
        if len(term.args) != 3:
            self.error(term, "occurs takes two time points and an action")
            return
        t1 = self.atom(term.args[0], "a time point")
        t2 = self.atom(term.args[1], "a time point")
        if t1 is None or t2 is None:
            return
        act = self.action(term.args[2])
        if act is None:
            return
        occ = Occurrence(t1, t2, act)
        if occ in self.occurrences:
            self.dup(term, str(occ))
            return
        self.occurrences[occ] = None
        self.positions[str(occ)] = (term.line, term.column)

    def declare_not_occurs(self, term: _Term) -> None:
        if len(term.args) != 3:
            self.error(term, "notOccurs takes two time points and a pattern")
            return
        t1 = self.atom(term.args[0], "a time point")
        t2 = self.atom(term.args[1], "a time point")
        if t1 is None or t2 is None:
            return
        pat = self.pattern(term.args[2])
        if pat is None:
            return
        non = NonOccurrence(t1, t2, pat)
        if non in self.non_occurrences:
            self.dup(term, str(non))
            return
        self.non_occurrences[non] = None
        self.positions[str(non)] = (term.line, term.column)


def parse_spec(text: str) -> ParseResult:
    """Parse problem text.  ``spec`` is None when any error was diagnosed."""
    tokens, lex_diags = _lex(text)
    parser = _Parser(tokens)
    statements = parser.statements()
    builder = _Builder()
    builder.diags.extend(lex_diags)
    builder.diags.extend(parser.diags)
    for fresh, term in statements:
        builder.statement(fresh, term)
    diags = sorted(builder.diags, key=lambda d: (d.line, d.column, d.message))
    if any(d.severity == "error" for d in diags):
        return ParseResult(None, diags)
    signature = Signature(
        sorts=dict(builder.sorts),
        locations=frozenset(builder.locations),
        triples=tuple(builder.triples),
        fresh=frozenset(builder.fresh),
    )
    spec = ProblemSpec.assemble(
        signature=signature,
        earlier_pairs=builder.earlier,
        holds_facts=builder.holds,
        occurrences=builder.occurrences,
        non_occurrences=builder.non_occurrences,
    )
    return ParseResult(spec, diags, builder.positions)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _interiors_overlap(tl: Timeline, a1: str, a2: str, b1: str, b2: str) -> bool:
    return tl.precedes(b1, a2) and tl.precedes(a1, b2)


def validate_spec(
    spec: ProblemSpec, positions: Optional[dict[str, tuple[int, int]]] = None
) -> ValidationReport:
    """Semantic checks over a parsed problem.  Never raises; the report
    carries one diagnostic per defect."""
    positions = positions or {}
    diags: list[Diagnostic] = []

    def err(message: str, key: str = "") -> None:
        line, col = positions.get(key, (0, 0))
        diags.append(Diagnostic("error", line, col, message))

    if not spec.time_points:
        err("no time points declared")
        return ValidationReport(tuple(diags))

    try:
        timeline = Timeline.from_pairs(spec.earlier_pairs, spec.time_points)
    except TimelineError as exc:
        err(str(exc))
        return ValidationReport(tuple(diags))

    sig = spec.signature
    for problem in sig.problems():
        err(problem)

    time_ids = set(timeline.points)
    clash = sorted(time_ids & (set(sig.sorts) | set(sig.locations)))
    for name in clash:
        err(f"{name!r} is used both as a time point and as an object or location")

    for t, fl in spec.holds_facts:
        key = f"holds({t},{fl})"
        if fl.name not in ASSERTABLE_FLUENTS:
            err(f"{fl.name} is derived and cannot be asserted: holds({t},{fl})", key)
        for msg in check_fluent(sig, fl):
            err(msg, key)

    for occ in spec.occurrences:
        key = str(occ)
        for msg in check_action(sig, occ.action):
            err(msg, key)
        if not timeline.precedes(occ.start, occ.end):
            err(f"occurrence interval is not ordered: {occ}", key)

    for non in spec.non_occurrences:
        key = str(non)
        for msg in check_pattern(sig, non.pattern):
            err(msg, key)
        if not timeline.precedes(non.start, non.end):
            err(f"non-occurrence interval is not ordered: {non}", key)

    occs = [o for o in spec.occurrences if timeline.precedes(o.start, o.end)]
    for i, a in enumerate(occs):
        for b in occs[i + 1 :]:
            if _interiors_overlap(timeline, a.start, a.end, b.start, b.end):
                err(f"overlapping occurrences: {a} and {b}", str(a))

    for occ in occs:
        for non in spec.non_occurrences:
            if not timeline.precedes(non.start, non.end):
                continue
            if _interiors_overlap(timeline, occ.start, occ.end, non.start, non.end):
                if matches_pattern(occ.action, non.pattern):
                    err(f"occurrence contradicts non-occurrence: {occ} vs {non}",
                        str(occ))

    by_time: dict[str, list[Fluent]] = {}
    for t, fl in spec.holds_facts:
        by_time.setdefault(t, []).append(fl)
    for t, fls in by_time.items():
        eff = {f.args[0] for f in fls if f.name == "effective"}
        ineff = {f.args[0] for f in fls if f.name == "ineffective"}
        for o in sorted(eff & ineff):
            err(f"{o!r} asserted both effective and ineffective at {t}",
                f"holds({t},ineffective({o}))")
        seen_at: dict[str, str] = {}
        for f in fls:
            if f.name != "outsideAt":
                continue
            o, l = f.args
            if o in seen_at and seen_at[o] != l:
                err(f"{o!r} asserted at two locations at {t}: "
                    f"{seen_at[o]} and {l}", f"holds({t},{f})")
            seen_at.setdefault(o, l)

    return ValidationReport(tuple(diags))


def load_valid_spec(text: str) -> ProblemSpec:
    """Parse and validate; raise :class:`SpecError` on any defect."""
    result = parse_spec(text)
    if result.spec is None:
        msgs = "; ".join(str(d) for d in result.diagnostics if d.severity == "error")
        raise SpecError(f"parse failed: {msgs}")
    report = validate_spec(result.spec, result.positions)
    if not report.valid:
        msgs = "; ".join(report.errors())
        raise SpecError(f"invalid problem: {msgs}")
    return result.spec


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------


def format_spec(spec: ProblemSpec) -> str:
    """Canonical text for a problem; reparsing yields an equal ProblemSpec."""
    sig = spec.signature
    lines: list[str] = []
    for sort in Sort:
        names = sorted(o for o, s in sig.sorts.items() if s is sort)
        for name in names:
            prefix = "fresh " if name in sig.fresh else ""
            lines.append(f"{prefix}{sort.value}({name}).")
    for triple in sig.triples:
        lines.append(f"{triple}.")
    for loc in sorted(sig.locations):
        prefix = "fresh " if loc in sig.fresh else ""
        lines.append(f"{prefix}location({loc}).")
    for a, b in spec.earlier_pairs:
        lines.append(f"earlier({a},{b}).")
    for t, fl in spec.holds_facts:
        lines.append(f"holds({t},{fl}).")
    for occ in spec.occurrences:
        lines.append(f"{occ}.")
    for non in spec.non_occurrences:
        lines.append(f"{non}.")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Query-term helpers (used by the command line)
# ---------------------------------------------------------------------------


def parse_fluent(text: str, signature: Optional[Signature] = None) -> Fluent:
    """Parse a single fluent term such as ``contained(oa,ow)``; optionally
    sort-check it against a signature.  Raises :class:`SpecError`."""
    tokens, lex_diags = _lex(text)
    if lex_diags:
        raise SpecError(f"cannot read fluent {text!r}: {lex_diags[0].message}")
    parser = _Parser(tokens)
    term = parser.term()
    if term is None or parser.diags or parser.peek().kind != "EOF":
        raise SpecError(f"cannot read fluent {text!r}")
    builder = _Builder()
    fl = builder.fluent(term, allow_unshielded=True)
    if fl is None:
        raise SpecError(
            f"cannot read fluent {text!r}: {builder.diags[0].message}"
        )
    if signature is not None:
        problems = check_fluent(signature, fl)
        if problems:
            raise SpecError("; ".join(problems))
    return fl
