"""Path replay over the decomposition tree: detect and repair entanglements.

Each execution path from step 1 is aligned against the annotated tree by
descendant-set routing. Two defect kinds are recognized: a loop body that a
path never enters (the loop must become a while), and a wholly absent block
flanked by its neighborhood (the block must become skippable through a
silent alternative).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import SkipNotAModule
from .mdt import LoopMode, MdtNode, ModuleKind, _materialize, find_node
from .relations import ExecutionPath

__all__ = [
    "AlignmentReport",
    "Resolution",
    "align_path",
    "resolve",
    "can_be_empty",
]


@dataclass(frozen=True)
class AlignmentReport:
    path: ExecutionPath
    fit: bool
    missed_loop_modules: tuple[frozenset[str], ...]
    skipped_blocks: tuple[frozenset[str], ...]
    unknown_activities: tuple[str, ...]
    residue: tuple[str, ...]


@dataclass(frozen=True)
class Resolution:
    kind: str  # "while_conversion" | "skip_insertion"
    module: frozenset[str]
    tau_id: str | None = None


def can_be_empty(node: MdtNode) -> bool:
    """True when the node admits a run that touches no visible activity."""
    if node.loop is LoopMode.WHILE:
        return True
    if node.kind is ModuleKind.TRIVIAL:
        return node.silent
    if node.kind is ModuleKind.COMPLETE_XOR:
        return any(can_be_empty(c) for c in node.children)
    return all(can_be_empty(c) for c in node.children)


@dataclass
class _AlignState:
    missed: list[frozenset[str]] = field(default_factory=list)
    skipped: list[frozenset[str]] = field(default_factory=list)
    residue: list[str] = field(default_factory=list)

    def note_missed(self, block: frozenset[str]) -> None:
        if block not in self.missed:
            self.missed.append(block)

    def note_skipped(self, block: frozenset[str]) -> None:
        if block not in self.skipped:
            self.skipped.append(block)


def _owner_map(children: tuple[MdtNode, ...]) -> dict[str, int]:
    owners: dict[str, int] = {}
    for idx, child in enumerate(children):
        for a in child.descendants:
            owners[a] = idx
    return owners


def _split_passes(node: MdtNode, seq: list[str]) -> list[list[str]]:
    """Split a loop projection into body passes.

    A new pass starts when an activity repeats; a body consumes each of its
    activities at most once per pass as long as it has no nested loops.
    """
    passes: list[list[str]] = []
    current: list[str] = []
    seen: set[str] = set()
    for item in seq:
        if item in seen:
            passes.append(current)
            current = []
            seen = set()
        current.append(item)
        seen.add(item)
    if current:
        passes.append(current)
    return passes


def _consume(node: MdtNode, seq: list[str], state: _AlignState) -> None:
    if not seq:
        return
    if node.loop is not LoopMode.NONE:
        for body_pass in _split_passes(node, seq):
            _consume_core(node, body_pass, state)
        return
    _consume_core(node, seq, state)


def _consume_core(node: MdtNode, seq: list[str], state: _AlignState) -> None:
    if node.kind is ModuleKind.TRIVIAL:
        state.residue.extend(seq[1:])
        return

    if node.kind is ModuleKind.LINEAR:
        owners = _owner_map(node.children)
        buckets: list[list[str]] = [[] for _ in node.children]
        current = 0
        for item in seq:
            idx = owners[item]
            if idx < current:
                state.residue.append(item)
            else:
                current = idx
                buckets[idx].append(item)
        nonempty = [bool(b) for b in buckets]
        gap_run: list[MdtNode] = []
        for idx, child in enumerate(node.children):
            if buckets[idx]:
                _flush_gap(gap_run, state)
                gap_run = []
                _consume(child, buckets[idx], state)
                continue
            if can_be_empty(child):
                continue
            if child.loop is LoopMode.REPEAT and any(nonempty[idx + 1:]):
                state.note_missed(child.descendants)
                continue
            gap_run.append(child)
        _flush_gap(gap_run, state)
        return

    if node.kind is ModuleKind.COMPLETE_XOR:
        owners = _owner_map(node.children)
        chosen = owners[seq[0]]
        bucket = []
        for item in seq:
            if owners[item] == chosen:
                bucket.append(item)
            else:
                state.residue.append(item)
        _consume(node.children[chosen], bucket, state)
        return

    # complete_and, and primitives treated leniently: membership routing only
    owners = _owner_map(node.children)
    buckets = [[] for _ in node.children]
    for item in seq:
        buckets[owners[item]].append(item)
    for idx, child in enumerate(node.children):
        if buckets[idx]:
            _consume(child, buckets[idx], state)
        elif can_be_empty(child):
            continue
        elif child.loop is LoopMode.REPEAT:
            state.note_missed(child.descendants)
        else:
            state.note_skipped(child.descendants)


def _flush_gap(gap_run: list[MdtNode], state: _AlignState) -> None:
    if not gap_run:
        return
    block = frozenset().union(*(c.descendants for c in gap_run))
    state.note_skipped(block)


def align_path(path: ExecutionPath, mdt: MdtNode) -> AlignmentReport:
    """Replay one path over the tree; total, never raises."""
    known = mdt.descendants
    unknown = tuple(s for s in path.steps if s not in known)
    seq = [s for s in path.steps if s in known]
    state = _AlignState()
    if seq:
        _consume(mdt, seq, state)
    fit = not (state.missed or state.skipped or state.residue or unknown)
    return AlignmentReport(
        path=path,
        fit=fit,
        missed_loop_modules=tuple(state.missed),
        skipped_blocks=tuple(state.skipped),
        unknown_activities=unknown,
        residue=tuple(state.residue),
    )


def _fresh_tau_id(block: frozenset[str], taken: frozenset[str]) -> str:
    base = f"tau-{min(block)}"
    candidate = base
    suffix = 2
    while candidate in taken:
        candidate = f"{base}-{suffix}"
        suffix += 1
    return candidate


def _set_loop(tree: MdtNode, block: frozenset[str], mode: LoopMode) -> MdtNode:
    if tree.descendants == block:
        return replace(tree, loop=mode)
    if block < tree.descendants:
        return replace(tree, children=tuple(_set_loop(c, block, mode) for c in tree.children))
    return tree


def _insert_skip(tree: MdtNode, block: frozenset[str], tau_id: str) -> MdtNode:
    """Replace the node for `block` by xor{node, silent leaf}, rebuilding the
    descendant sets on the way up."""
    if tree.descendants == block:
        tau = MdtNode(
            kind=ModuleKind.TRIVIAL,
            children=(),
            descendants=frozenset({tau_id}),
            leaf_activity=tau_id,
            silent=True,
        )
        pair = tuple(sorted((tree, tau), key=lambda n: min(n.descendants)))
        return MdtNode(
            kind=ModuleKind.COMPLETE_XOR,
            children=pair,
            descendants=block | {tau_id},
        )
    children = tuple(
        _insert_skip(c, block, tau_id) if block <= c.descendants else c
        for c in tree.children
    )
    return replace(
        tree,
        children=children,
        descendants=frozenset().union(*(c.descendants for c in children)),
    )


def _already_skippable(tree: MdtNode, block: frozenset[str]) -> bool:
    """True when the block already sits under an xor with a silent branch."""
    for node in tree.walk():
        if node.kind is ModuleKind.COMPLETE_XOR and any(
            c.descendants == block for c in node.children
        ):
            if any(c.silent for c in node.children):
                return True
    return False


def _nearest(tree: MdtNode, block: frozenset[str]) -> frozenset[str]:
    best = tree.descendants
    for node in tree.walk():
        if block <= node.descendants and len(node.descendants) < len(best):
            best = node.descendants
    return best


def resolve(mdt: MdtNode, reports: list[AlignmentReport]) -> tuple[MdtNode, list[Resolution]]:
    """Repair the tree so the reported paths can replay.

    While-conversions are applied before skip insertions; both are applied at
    most once per module, so repeated reports leave the result unchanged.
    """
    resolutions: list[Resolution] = []
    tree = mdt

    missed: list[frozenset[str]] = []
    skips: list[frozenset[str]] = []
    for report in reports:
        for block in report.missed_loop_modules:
            if block not in missed:
                missed.append(block)
        for block in report.skipped_blocks:
            if block not in skips:
                skips.append(block)

    for block in missed:
        node = find_node(tree, block)
        if node is None or node.loop is not LoopMode.REPEAT:
            continue
        tree = _set_loop(tree, block, LoopMode.WHILE)
        resolutions.append(Resolution(kind="while_conversion", module=block))

    for block in skips:
        if _already_skippable(tree, block):
            continue
        missed_after_conversion = find_node(tree, block)
        if missed_after_conversion is not None and missed_after_conversion.loop is LoopMode.WHILE:
            continue  # the while conversion already made the block optional
        materialized = _materialize(tree, block)
        if materialized is None:
            raise SkipNotAModule(block, _nearest(tree, block))
        tree = materialized
        tau_id = _fresh_tau_id(block, tree.descendants)
        tree = _insert_skip(tree, block, tau_id)
        resolutions.append(Resolution(kind="skip_insertion", module=block, tau_id=tau_id))

    return tree, resolutions
