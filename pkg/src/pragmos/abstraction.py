"""Block abstraction: eliminate enforced loops by folding recurring segments.

When the corpus forces a cyclic causality (typically because one activity is
named in several places of a path), the recurring segments are replaced by
fresh abstract activities. The abstract activity later expands into a
sub-model computed from its segment variants.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import CyclicCausality, ExpansionError, NoRepetition, OverlappingVariants
from .mdt import decompose
from .relations import dfg_to_org, normalize_activities, paths_to_dfg, slugify

__all__ = [
    "AbstractionEntry",
    "AbstractionTable",
    "SegmentGroup",
    "find_repetition_segments",
    "apply_abstraction",
    "expand_abstract_activity",
]

LabelPath = list[str]


@dataclass(frozen=True)
class AbstractionEntry:
    id: str
    label: str
    variants: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class AbstractionTable:
    entries: tuple[AbstractionEntry, ...]
    provenance: str = "llm"  # "llm" | "human"


@dataclass(frozen=True)
class SegmentGroup:
    """Path segments bounded by the occurrences of one repeated activity."""

    repeated: str
    orientation: str  # "leading" | "trailing"
    segments: tuple[tuple[int, tuple[str, ...]], ...]  # (path index, labels)

    def variants(self) -> list[tuple[str, ...]]:
        seen: dict[tuple[str, ...], None] = {}
        for _, segment in self.segments:
            seen.setdefault(segment, None)
        return list(seen)


def _cyclic_labels(paths: list[LabelPath]) -> set[str]:
    """Labels on any cycle of the label-level directly-follows graph."""
    edges: dict[str, set[str]] = {}
    for path in paths:
        for a, b in zip(path, path[1:]):
            edges.setdefault(a, set()).add(b)

    # Tarjan strongly connected components
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = [0]
    cyclic: set[str] = set()

    def strongconnect(v: str):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w in sorted(edges.get(v, ())):
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.append(w)
                if w == v:
                    break
            if len(comp) > 1 or (comp[0] in edges.get(comp[0], ())):
                cyclic.update(comp)

    vertices = sorted({a for p in paths for a in p})
    for v in vertices:
        if v not in index:
            strongconnect(v)
    return cyclic


def find_repetition_segments(paths: list[LabelPath], cycle: list[str] | None = None) -> list[SegmentGroup]:
    """Maximal segments bounded by repeated-activity occurrences, per path.

    Triggered by a cyclic-causality witness or by any activity occurring more
    than once within one path; raises NoRepetition when neither applies.
    """
    repeated: list[str] = []
    for path in paths:
        counts: dict[str, int] = {}
        for label in path:
            counts[label] = counts.get(label, 0) + 1
        for label, count in counts.items():
            if count > 1 and label not in repeated:
                repeated.append(label)
    if not repeated and not cycle:
        raise NoRepetition("no repeated activity and no causality cycle")
    if not repeated:
        raise NoRepetition(
            "a causality cycle without in-path repetition cannot be segmented"
        )

    zone_labels = _cyclic_labels(paths) | set(repeated)
    groups: list[SegmentGroup] = []
    for r in repeated:
        segments: list[tuple[int, tuple[str, ...]]] = []
        orientation = "trailing"
        for path_index, path in enumerate(paths):
            occurrences = [i for i, label in enumerate(path) if label == r]
            if len(occurrences) < 2:
                continue
            # the repetition zone: the maximal run of loop-implicated labels
            # around the occurrences
            start = occurrences[0]
            while start > 0 and path[start - 1] in zone_labels:
                start -= 1
            end = occurrences[-1]
            while end + 1 < len(path) and path[end + 1] in zone_labels:
                end += 1
            if path[start] == r:
                orientation = "leading"
                bounds = occurrences + [end + 1]
                pieces = [
                    tuple(path[bounds[k]:bounds[k + 1]])
                    for k in range(len(occurrences))
                ]
            else:
                orientation = "trailing"
                bounds = [start - 1] + occurrences
                pieces = [
                    tuple(path[bounds[k] + 1:bounds[k + 1] + 1])
                    for k in range(len(occurrences))
                ]
                tail = tuple(path[occurrences[-1] + 1:end + 1])
                if tail:
                    pieces.append(tail)
            segments.extend((path_index, piece) for piece in pieces if piece)
        groups.append(
            SegmentGroup(repeated=r, orientation=orientation, segments=tuple(segments))
        )
    return groups


def table_from_entries(entries: list[dict], existing_labels: set[str], provenance: str = "llm") -> AbstractionTable:
    """Build a validated table from parsed {label, variants} records, minting
    fresh ids that cannot collide with the base activities."""
    taken = {slugify(label) for label in existing_labels}
    out: list[AbstractionEntry] = []
    for entry in entries:
        label = entry["label"]
        variants = tuple(tuple(v) for v in entry["variants"])
        if not variants or any(not v for v in variants):
            raise ValueError(f"entry {label!r} needs nonempty variants")
        base = entry.get("id") or slugify(label)
        candidate = base
        suffix = 2
        while candidate in taken:
            candidate = f"{base}-{suffix}"
            suffix += 1
        taken.add(candidate)
        out.append(AbstractionEntry(id=candidate, label=label, variants=variants))
    return AbstractionTable(entries=tuple(out), provenance=provenance)


def _matches(path: LabelPath, pos: int, variant: tuple[str, ...]) -> bool:
    return tuple(path[pos:pos + len(variant)]) == variant


def apply_abstraction(paths: list[LabelPath], table: AbstractionTable) -> list[LabelPath]:
    """Replace every variant occurrence by its entry's label, leftmost-longest,
    ties broken by table entry order."""
    # Cross-entry matches that overlap without sharing a start position are
    # unresolvable: the longest-at-position rule only arbitrates same-start
    # ties, anything staggered would silently swallow another entry's segment.
    for path_index, path in enumerate(paths):
        claimed: list[tuple[int, int, str]] = []
        for entry in table.entries:
            for variant in entry.variants:
                for pos in range(len(path) - len(variant) + 1):
                    if _matches(path, pos, variant):
                        claimed.append((pos, pos + len(variant), entry.id))
        for i, (s1, e1, id1) in enumerate(claimed):
            for s2, e2, id2 in claimed[i + 1:]:
                if id1 != id2 and s1 != s2 and s1 < e2 and s2 < e1:
                    raise OverlappingVariants(
                        f"entries {id1!r} and {id2!r} overlap in path {path_index}"
                    )

    candidates = sorted(
        (
            (len(variant), -entry_order, entry, variant)
            for entry_order, entry in enumerate(table.entries)
            for variant in entry.variants
        ),
        key=lambda item: (-item[0], -item[1]),
    )

    result: list[LabelPath] = []
    for path in paths:
        out: list[str] = []
        pos = 0
        while pos < len(path):
            for _, _, entry, variant in candidates:
                if _matches(path, pos, variant):
                    out.append(entry.label)
                    pos += len(variant)
                    break
            else:
                out.append(path[pos])
                pos += 1
        result.append(out)
    return result


def expand_abstract_activity(abstract_id: str, table: AbstractionTable):
    """Sub-model for one abstract activity, from its variants as paths.

    Runs the deterministic pipeline (normalize, relations, decomposition,
    synthesis) over the variants; recursion stays at depth one because the
    sub-pipeline never abstracts again.
    """
    from .synthesis import synthesize

    entry = next((e for e in table.entries if e.id == abstract_id), None)
    if entry is None:
        raise KeyError(f"no abstraction entry {abstract_id!r}")
    try:
        corpus = normalize_activities([list(v) for v in entry.variants])
        org = dfg_to_org(paths_to_dfg(corpus.paths))
        tree = decompose(org)
        return synthesize(tree, corpus.activities)
    except CyclicCausality as exc:
        raise ExpansionError(abstract_id, exc) from exc
