"""Behavioral relations: directly-follows graph and ordering relations graph.

The ordering relations graph (ORG) classifies every unordered activity pair
as exactly one of causality (a precedes b), concurrency, or conflict.
Causality is transitive; concurrency and conflict are symmetric. Conflict is
stored explicitly so that a missing classification is distinguishable from a
deliberate one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import ConflictingEvidence, CyclicCausality, EmptyPath

__all__ = [
    "Activity",
    "ExecutionPath",
    "Corpus",
    "RepetitionFlag",
    "Dfg",
    "RelationKind",
    "Org",
    "Diagnostic",
    "normalize_activities",
    "paths_to_dfg",
    "dfg_to_org",
    "inject_concurrency",
    "verify_org",
    "slugify",
]


@dataclass(frozen=True)
class Activity:
    id: str
    label: str
    silent: bool = False


@dataclass(frozen=True)
class ExecutionPath:
    steps: tuple[str, ...]

    def __post_init__(self):
        if len(self.steps) == 0:
            raise EmptyPath("execution path must contain at least one step")


@dataclass(frozen=True)
class RepetitionFlag:
    """An activity occurring more than once within a single path."""

    path_index: int
    activity_id: str
    count: int


@dataclass(frozen=True)
class Corpus:
    """Normalized execution paths with their activity table."""

    activities: dict[str, Activity]
    paths: tuple[ExecutionPath, ...]
    repetitions: tuple[RepetitionFlag, ...]

    def labels(self) -> list[str]:
        """Activity labels in first-appearance order over the paths."""
        seen: dict[str, None] = {}
        for path in self.paths:
            for step in path.steps:
                seen.setdefault(step, None)
        return [self.activities[a].label for a in seen]


_SLUG_RE = re.compile(r"[^a-z0-9]+")


def slugify(label: str) -> str:
    slug = _SLUG_RE.sub("-", label.lower()).strip("-")
    return slug or "activity"


def normalize_activities(paths: list[list[str]]) -> Corpus:
    """Assign stable ids to labels and rewrite paths over them.

    Ids are a function of the label set alone: labels are slugged, and
    distinct labels colliding on the same slug get numeric suffixes in
    lexicographic label order. Duplicate occurrences within one path are
    flagged, not rejected.
    """
    if not paths:
        raise EmptyPath("at least one execution path is required")
    for i, path in enumerate(paths):
        if not path:
            raise EmptyPath(f"execution path {i} has no steps")
        for label in path:
            if not isinstance(label, str) or not label.strip():
                raise EmptyPath(f"execution path {i} contains an empty label")

    labels = sorted({label for path in paths for label in path})
    ids: dict[str, str] = {}
    taken: set[str] = set()
    for label in labels:
        base = slugify(label)
        candidate = base
        suffix = 2
        while candidate in taken:
            candidate = f"{base}-{suffix}"
            suffix += 1
        taken.add(candidate)
        ids[label] = candidate

    activities = {ids[label]: Activity(id=ids[label], label=label) for label in labels}
    norm_paths = tuple(
        ExecutionPath(tuple(ids[label] for label in path)) for path in paths
    )

    flags: list[RepetitionFlag] = []
    for i, path in enumerate(norm_paths):
        counts: dict[str, int] = {}
        for step in path.steps:
            counts[step] = counts.get(step, 0) + 1
        for act, count in counts.items():
            if count > 1:
                flags.append(RepetitionFlag(path_index=i, activity_id=act, count=count))

    return Corpus(activities=activities, paths=norm_paths, repetitions=tuple(flags))


@dataclass(frozen=True)
class Dfg:
    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]
    start_successors: frozenset[str]
    end_predecessors: frozenset[str]


def paths_to_dfg(paths: list[ExecutionPath] | tuple[ExecutionPath, ...]) -> Dfg:
    """Directly-follows graph: an edge per adjacent pair in any path."""
    if not paths:
        raise EmptyPath("at least one execution path is required")
    nodes: set[str] = set()
    edges: set[tuple[str, str]] = set()
    starts: set[str] = set()
    ends: set[str] = set()
    for path in paths:
        nodes.update(path.steps)
        starts.add(path.steps[0])
        ends.add(path.steps[-1])
        for a, b in zip(path.steps, path.steps[1:]):
            edges.add((a, b))
    return Dfg(
        nodes=frozenset(nodes),
        edges=frozenset(edges),
        start_successors=frozenset(starts),
        end_predecessors=frozenset(ends),
    )


class RelationKind(str, Enum):
    PRECEDES = "precedes"
    CONCURRENT = "concurrent"
    CONFLICT = "conflict"


def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class _Rel:
    kind: RelationKind
    # For PRECEDES: causal direction, "ab" meaning pair[0] before pair[1].
    # For CONCURRENT: the causal direction the pair had before it was made
    # concurrent, if any; used to demote apparent concurrency between
    # injection rounds. None when the orientation is genuinely ambiguous.
    orient: str | None = None


@dataclass(frozen=True)
class Org:
    """Total pairwise classification of activities.

    `rel` maps every unordered pair (lexicographically sorted tuple) to its
    relation. Treat instances as immutable values.
    """

    nodes: frozenset[str]
    rel: dict[tuple[str, str], _Rel] = field(compare=True)

    def kind(self, a: str, b: str) -> RelationKind:
        return self.rel[_pair(a, b)].kind

    def precedes(self, a: str, b: str) -> bool:
        if a == b:
            return False
        entry = self.rel.get(_pair(a, b))
        if entry is None or entry.kind is not RelationKind.PRECEDES:
            return False
        return (entry.orient == "ab") == (a < b)

    def pairs(self):
        return self.rel.items()

    def __hash__(self):
        return hash((self.nodes, tuple(sorted(self.rel.items(), key=lambda kv: kv[0]))))


def _find_cycle(nodes: frozenset[str], succ: dict[str, set[str]]) -> list[str] | None:
    """Return one directed cycle as a vertex list, or None."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {v: WHITE for v in nodes}
    stack: list[str] = []

    def visit(v: str) -> list[str] | None:
        color[v] = GRAY
        stack.append(v)
        for w in sorted(succ.get(v, ())):
            if color[w] == GRAY:
                return stack[stack.index(w):] + [w]
            if color[w] == WHITE:
                found = visit(w)
                if found:
                    return found
        stack.pop()
        color[v] = BLACK
        return None

    for v in sorted(nodes):
        if color[v] == WHITE:
            found = visit(v)
            if found:
                return found
    return None


def dfg_to_org(dfg: Dfg) -> Org:
    """Derive the ordering relations graph from a directly-follows graph.

    Mutual edges become concurrency (the alpha-algorithm heuristic); the
    remaining direct causality is closed transitively; every pair left
    unclassified is a conflict. Raises CyclicCausality when the causality
    digraph is cyclic, which routes the corpus to block abstraction.
    """
    nodes = dfg.nodes
    mutual: set[tuple[str, str]] = set()
    direct: dict[str, set[str]] = {v: set() for v in nodes}
    for a, b in dfg.edges:
        if a == b or (b, a) in dfg.edges:
            mutual.add(_pair(a, b))
        else:
            direct[a].add(b)

    cycle = _find_cycle(nodes, direct)
    if cycle:
        raise CyclicCausality(cycle)

    # Transitive closure over the acyclic direct-causality digraph.
    order = sorted(nodes)
    reach: dict[str, set[str]] = {v: set() for v in nodes}

    def close(v: str) -> set[str]:
        if reach[v]:
            return reach[v]
        acc: set[str] = set()
        for w in direct[v]:
            acc.add(w)
            acc |= close(w)
        reach[v] = acc
        return acc

    for v in order:
        close(v)

    rel: dict[tuple[str, str], _Rel] = {}
    for i, a in enumerate(order):
        for b in order[i + 1:]:
            key = (a, b)
            if key in mutual:
                rel[key] = _Rel(RelationKind.CONCURRENT, None)
            elif b in reach[a]:
                rel[key] = _Rel(RelationKind.PRECEDES, "ab")
            elif a in reach[b]:
                rel[key] = _Rel(RelationKind.PRECEDES, "ba")
            else:
                rel[key] = _Rel(RelationKind.CONFLICT, None)
    return Org(nodes=nodes, rel=rel)


def inject_concurrency(org: Org, pairs: set[tuple[str, str]]) -> Org:
    """Replace causal relations by concurrency for the given pairs.

    Apparent concurrency from earlier rounds is dropped first: concurrent
    pairs with a recorded causal orientation are demoted back to causality;
    pairs whose orientation was never determined stay concurrent. Listed
    pairs classified as conflict are rejected for analyst review.
    """
    rel = dict(org.rel)
    for key, entry in rel.items():
        if entry.kind is RelationKind.CONCURRENT and entry.orient is not None:
            rel[key] = _Rel(RelationKind.PRECEDES, entry.orient)

    for a, b in pairs:
        if a not in org.nodes or b not in org.nodes:
            raise KeyError(f"unknown activity in pair ({a}, {b})")
        if a == b:
            continue
        key = _pair(a, b)
        entry = rel[key]
        if entry.kind is RelationKind.CONFLICT:
            raise ConflictingEvidence((a, b))
        if entry.kind is RelationKind.PRECEDES:
            rel[key] = _Rel(RelationKind.CONCURRENT, entry.orient)
        # already concurrent: idempotent

    return Org(nodes=org.nodes, rel=rel)


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    pair: tuple[str, str]
    detail: str = ""


def verify_org(org: Org) -> list[Diagnostic]:
    """Check all ORG invariants; an empty list means the graph is well formed.

    Transitivity is conditional: a<b and b<c demand a<c unless {a,c} is
    concurrent, which a later injection round may legitimately produce.
    """
    diags: list[Diagnostic] = []
    order = sorted(org.nodes)
    for i, a in enumerate(order):
        for b in order[i + 1:]:
            entry = org.rel.get((a, b))
            if entry is None:
                diags.append(Diagnostic("UnclassifiedPair", (a, b)))
            elif entry.kind is RelationKind.PRECEDES and entry.orient not in ("ab", "ba"):
                diags.append(
                    Diagnostic("MissingOrientation", (a, b), "precedes without direction")
                )

    for extra in set(org.rel) - {(a, b) for i, a in enumerate(order) for b in order[i + 1:]}:
        diags.append(Diagnostic("ForeignPair", extra, "pair not over the node set"))

    if diags:
        return diags

    for a in order:
        for b in order:
            if a == b or not org.precedes(a, b):
                continue
            for c in order:
                if c == a or c == b or not org.precedes(b, c):
                    continue
                if org.precedes(c, a):
                    diags.append(
                        Diagnostic("TransitivityViolation", _pair(a, c), f"{a}<{b}<{c} but {c}<{a}")
                    )
                elif org.kind(a, c) is RelationKind.CONFLICT:
                    diags.append(
                        Diagnostic("TransitivityViolation", _pair(a, c), f"{a}<{b}<{c} but {a}#{c}")
                    )
    # Deduplicate; a pair can be reached through several intermediate nodes.
    unique: dict[tuple[str, tuple[str, str]], Diagnostic] = {}
    for d in diags:
        unique.setdefault((d.rule, d.pair), d)
    return list(unique.values())
