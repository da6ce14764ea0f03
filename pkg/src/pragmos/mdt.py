"""Modular decomposition of ordering relations graphs.

A module is a vertex set whose members bear the identical relation
(including causal direction) to every outside vertex. The decomposition
tree nests the strong modules; each internal node is classified by its
quotient: linear (total order), complete_and (concurrency clique),
complete_xor (conflict clique), or primitive.

The algorithm is deliberately the naive polynomial one: connected-component
splits for the complete cases, non-comparability components for the linear
case, and smallest-enclosing-module closures for primitive quotients.
Instances stay well under a hundred nodes, and the acceptance suite
cross-checks against exhaustive subset enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .errors import LoopNotAModule
from .relations import Org, RelationKind

__all__ = [
    "ModuleKind",
    "LoopMode",
    "MdtNode",
    "is_module",
    "decompose",
    "annotate_loop",
    "canonical_form",
    "find_node",
    "smallest_enclosing",
]


class ModuleKind(str, Enum):
    TRIVIAL = "trivial"
    LINEAR = "linear"
    COMPLETE_AND = "complete_and"
    COMPLETE_XOR = "complete_xor"
    PRIMITIVE = "primitive"


class LoopMode(str, Enum):
    NONE = "none"
    REPEAT = "repeat"
    WHILE = "while"


@dataclass(frozen=True)
class MdtNode:
    kind: ModuleKind
    children: tuple[MdtNode, ...]
    descendants: frozenset[str]
    leaf_activity: str | None = None
    loop: LoopMode = LoopMode.NONE
    silent: bool = False

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


def _relation_signature(org: Org, a: str, v: str):
    kind = org.kind(a, v)
    if kind is RelationKind.PRECEDES:
        return ("precedes", org.precedes(a, v))
    return (kind.value, None)


def is_module(org: Org, m: frozenset[str] | set[str]) -> bool:
    """True iff every outside vertex relates uniformly to all members of m."""
    members = list(m)
    if not members:
        raise ValueError("a module must be nonempty")
    if not set(members) <= set(org.nodes):
        raise ValueError("module members must be graph nodes")
    if len(members) == 1:
        return True
    first = members[0]
    for v in org.nodes - set(members):
        sig = _relation_signature(org, first, v)
        for a in members[1:]:
            if _relation_signature(org, a, v) != sig:
                return False
    return True


def smallest_enclosing(org: Org, seed: set[str], universe: frozenset[str] | None = None) -> frozenset[str]:
    """Smallest module of org (restricted to `universe`) containing `seed`.

    Closure: any vertex that distinguishes two current members gets pulled in.
    """
    universe = universe if universe is not None else org.nodes
    current = set(seed)
    changed = True
    while changed:
        changed = False
        members = list(current)
        first = members[0]
        for v in universe - current:
            sig = _relation_signature(org, first, v)
            if any(_relation_signature(org, a, v) != sig for a in members[1:]):
                current.add(v)
                changed = True
    return frozenset(current)


def _components(vertices: list[str], adjacent) -> list[set[str]]:
    remaining = set(vertices)
    comps: list[set[str]] = []
    while remaining:
        start = min(remaining)
        comp = {start}
        frontier = [start]
        while frontier:
            v = frontier.pop()
            for w in list(remaining - comp):
                if adjacent(v, w):
                    comp.add(w)
                    frontier.append(w)
        remaining -= comp
        comps.append(comp)
    return comps


def _split(org: Org, w: frozenset[str]) -> tuple[ModuleKind, list[frozenset[str]]]:
    """Kind of the decomposition node over w and its children vertex sets."""
    vertices = sorted(w)

    # Complete cases: components once all edges of one symmetric kind are cut.
    xor_comps = _components(
        vertices, lambda a, b: org.kind(a, b) is not RelationKind.CONFLICT
    )
    if len(xor_comps) > 1:
        return ModuleKind.COMPLETE_XOR, [frozenset(c) for c in xor_comps]

    and_comps = _components(
        vertices, lambda a, b: org.kind(a, b) is not RelationKind.CONCURRENT
    )
    if len(and_comps) > 1:
        return ModuleKind.COMPLETE_AND, [frozenset(c) for c in and_comps]

    # Linear case: start from the components of the non-comparability graph
    # and merge any block with the block of a vertex distinguishing its
    # members (such a vertex must share the enclosing module). At the merge
    # fixpoint every block is a module; a strict total order over >= 2
    # blocks certifies a linear node with exactly those children.
    blocks = _components(
        vertices, lambda a, b: org.kind(a, b) is not RelationKind.PRECEDES
    )
    merged = True
    while merged and len(blocks) > 1:
        merged = False
        for i, blk in enumerate(blocks):
            if len(blk) < 2:
                continue
            members = sorted(blk)
            first = members[0]
            for v in set(w) - blk:
                sig = _relation_signature(org, first, v)
                if any(_relation_signature(org, a, v) != sig for a in members[1:]):
                    j = next(k for k, other in enumerate(blocks) if v in other)
                    blocks[i] = blk | blocks[j]
                    del blocks[j]
                    merged = True
                    break
            if merged:
                break
    if len(blocks) > 1:
        reps = [min(c) for c in blocks]
        # All cross pairs are precedes by construction; modularity makes the
        # direction uniform per block pair, so sorting by the count of
        # successors linearizes a valid quotient.
        succ_counts = {
            i: sum(
                1
                for j in range(len(blocks))
                if j != i and org.precedes(reps[i], reps[j])
            )
            for i in range(len(blocks))
        }
        by_position = sorted(range(len(blocks)), key=lambda i: -succ_counts[i])
        total_order = all(
            succ_counts[i] == len(blocks) - 1 - pos
            for pos, i in enumerate(by_position)
        ) and all(
            org.precedes(reps[by_position[k]], reps[by_position[k + 1]])
            for k in range(len(by_position) - 1)
        )
        if total_order:
            return ModuleKind.LINEAR, [frozenset(blocks[i]) for i in by_position]

    # Primitive: each child is the union of all proper submodules through one
    # vertex (every proper module sits inside a single child of a primitive
    # node, so the union is exactly that child).
    children: list[frozenset[str]] = []
    assigned: set[str] = set()
    for v in vertices:
        if v in assigned:
            continue
        block: set[str] = {v}
        for u in vertices:
            if u == v or u in block:
                continue
            candidate = smallest_enclosing(org, {v, u}, universe=w)
            if candidate != w:
                block |= candidate
        children.append(frozenset(block))
        assigned |= block
    if any(part == w for part in children):
        raise AssertionError(f"decomposition made no progress on {sorted(w)}")
    return ModuleKind.PRIMITIVE, children


def _min_id(node: MdtNode) -> str:
    return min(node.descendants)


def decompose(org: Org) -> MdtNode:
    """Unique modular decomposition tree of a well-formed ORG."""
    if not org.nodes:
        raise ValueError("cannot decompose an empty graph")
    return _decompose(org, frozenset(org.nodes))


def _decompose(org: Org, w: frozenset[str]) -> MdtNode:
    if len(w) == 1:
        (leaf,) = w
        return MdtNode(
            kind=ModuleKind.TRIVIAL,
            children=(),
            descendants=w,
            leaf_activity=leaf,
        )
    kind, parts = _split(org, w)
    children = [_decompose(org, part) for part in parts]
    if kind is not ModuleKind.LINEAR:
        children.sort(key=_min_id)
    return MdtNode(kind=kind, children=tuple(children), descendants=w)


def find_node(mdt: MdtNode, block: frozenset[str]) -> MdtNode | None:
    for node in mdt.walk():
        if node.descendants == block:
            return node
    return None


def _nearest_enclosing(mdt: MdtNode, block: frozenset[str]) -> frozenset[str]:
    best = mdt.descendants
    for node in mdt.walk():
        if block <= node.descendants and len(node.descendants) < len(best):
            best = node.descendants
    return best


def _materialize(node: MdtNode, block: frozenset[str]) -> MdtNode | None:
    """Rewrite the tree so that `block` becomes a node, when it is a module.

    A union of whole children of one node is a module whenever the node is
    complete, or the children are consecutive under a linear node. The
    grouped child keeps the parent's kind, which preserves the quotient.
    """
    if node.descendants == block:
        return node
    if not (block < node.descendants):
        return None
    for i, child in enumerate(node.children):
        if block <= child.descendants:
            rewritten = _materialize(child, block)
            if rewritten is None:
                return None
            return replace(
                node,
                children=node.children[:i] + (rewritten,) + node.children[i + 1:],
            )
    # block spans several children: it must be the union of whole ones
    covered: list[int] = []
    union: set[str] = set()
    for i, child in enumerate(node.children):
        if child.descendants & block:
            if not child.descendants <= block:
                return None
            covered.append(i)
            union |= child.descendants
    if frozenset(union) != block or len(covered) < 2:
        return None
    if node.kind is ModuleKind.LINEAR:
        if covered != list(range(covered[0], covered[-1] + 1)):
            return None  # non-consecutive runs of a sequence are not modules
        group_kind = ModuleKind.LINEAR
    elif node.kind in (ModuleKind.COMPLETE_AND, ModuleKind.COMPLETE_XOR):
        group_kind = node.kind
    else:
        return None  # unions of a primitive node's children are never modules
    grouped_children = tuple(node.children[i] for i in covered)
    if node.kind is not ModuleKind.LINEAR:
        grouped_children = tuple(sorted(grouped_children, key=_min_id))
    group = MdtNode(kind=group_kind, children=grouped_children, descendants=block)
    rest = [c for i, c in enumerate(node.children) if i not in covered]
    if node.kind is ModuleKind.LINEAR:
        new_children = (
            node.children[:covered[0]] + (group,) + node.children[covered[-1] + 1:]
        )
    else:
        new_children = tuple(sorted(rest + [group], key=_min_id))
    return replace(node, children=new_children)


def annotate_loop(mdt: MdtNode, block: frozenset[str] | set[str], mode: LoopMode) -> MdtNode:
    """Set the loop mode of the module with the given descendant set.

    The block must be a module: either an existing tree node, or a union of
    whole children of one node (consecutive when linear), which is then
    materialized as a nested node. Anything else is rejected with the
    smallest enclosing module so the analyst or LLM can iterate.
    """
    if mode not in (LoopMode.REPEAT, LoopMode.WHILE):
        raise ValueError("loop mode must be repeat or while")
    block = frozenset(block)
    if not block:
        raise ValueError("loop block must be nonempty")
    if not block <= mdt.descendants:
        raise LoopNotAModule(block, mdt.descendants)

    materialized = _materialize(mdt, block)
    if materialized is None:
        raise LoopNotAModule(block, _nearest_enclosing(mdt, block))

    def set_mode(node: MdtNode) -> MdtNode:
        if node.descendants == block:
            return replace(node, loop=mode)
        if block < node.descendants:
            return replace(node, children=tuple(set_mode(c) for c in node.children))
        return node

    return set_mode(materialized)


def canonical_form(mdt: MdtNode) -> MdtNode:
    """Sort order-insensitive children by least descendant id; idempotent."""
    children = tuple(canonical_form(c) for c in mdt.children)
    if mdt.kind in (ModuleKind.COMPLETE_AND, ModuleKind.COMPLETE_XOR, ModuleKind.PRIMITIVE):
        children = tuple(sorted(children, key=_min_id))
    return replace(mdt, children=children)
