"""Translation of annotated decomposition trees into block-structured models.

Each tree node becomes a single-entry/single-exit fragment: sequences for
linear nodes, gateway blocks for complete nodes, loop gateways for annotated
nodes. Primitive nodes are rejected; structuring them is out of scope.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .errors import PrimitiveModuleUnsupported
from .mdt import LoopMode, MdtNode, ModuleKind
from .relations import Activity

__all__ = ["FlowNode", "ProcessModel", "synthesize", "structure_hash"]

START = "start"
END = "end"
TASK = "task"
XOR = "xor_gateway"
AND = "and_gateway"


@dataclass(frozen=True)
class FlowNode:
    id: str
    kind: str
    activity: str | None = None
    gateway_role: str | None = None  # "split" | "join"


@dataclass(frozen=True)
class ProcessModel:
    nodes: tuple[FlowNode, ...]
    flows: tuple[tuple[str, str], ...]
    entry: str
    exit: str

    def node(self, node_id: str) -> FlowNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def tasks(self) -> list[FlowNode]:
        return [n for n in self.nodes if n.kind == TASK]


class _Builder:
    def __init__(self):
        self.nodes: list[FlowNode] = []
        self.flows: list[tuple[str, str]] = []
        self._count = 0

    def add(self, kind: str, activity: str | None = None, role: str | None = None) -> str:
        node_id = f"n{self._count}"
        self._count += 1
        self.nodes.append(FlowNode(id=node_id, kind=kind, activity=activity, gateway_role=role))
        return node_id

    def flow(self, src: str, dst: str) -> None:
        self.flows.append((src, dst))


def _is_silent(node: MdtNode, activities: dict[str, Activity]) -> bool:
    if node.silent:
        return True
    act = activities.get(node.leaf_activity or "")
    return bool(act and act.silent)


def _fragment(node: MdtNode, b: _Builder, activities: dict[str, Activity]) -> tuple[str, str] | None:
    """Emit the fragment for one tree node; None when it is purely silent."""
    inner = _fragment_core(node, b, activities)
    if node.loop is LoopMode.NONE:
        return inner
    if inner is None:
        raise ValueError("a loop body cannot be entirely silent")
    entry, exit_ = inner

    if node.loop is LoopMode.REPEAT:
        # join before the body, split after it, back edge split -> join:
        # the body runs once unconditionally, then as often as re-entered.
        join = b.add(XOR, role="join")
        split = b.add(XOR, role="split")
        b.flow(join, entry)
        b.flow(exit_, split)
        b.flow(split, join)
        return join, split

    # while: the decision precedes the body, so zero executions are possible.
    # Join receives the incoming flow and the body's return; the split either
    # enters the body or continues.
    join = b.add(XOR, role="join")
    split = b.add(XOR, role="split")
    b.flow(join, split)
    b.flow(split, entry)
    b.flow(exit_, join)
    return join, split


def _fragment_core(node: MdtNode, b: _Builder, activities: dict[str, Activity]) -> tuple[str, str] | None:
    if node.kind is ModuleKind.TRIVIAL:
        if _is_silent(node, activities):
            return None
        task = b.add(TASK, activity=node.leaf_activity)
        return task, task

    if node.kind is ModuleKind.LINEAR:
        parts: list[tuple[str, str]] = []
        for child in node.children:
            frag = _fragment(child, b, activities)
            if frag is not None:
                parts.append(frag)
        if not parts:
            return None
        for (_, prev_exit), (next_entry, _) in zip(parts, parts[1:]):
            b.flow(prev_exit, next_entry)
        return parts[0][0], parts[-1][1]

    if node.kind in (ModuleKind.COMPLETE_AND, ModuleKind.COMPLETE_XOR):
        gw = AND if node.kind is ModuleKind.COMPLETE_AND else XOR
        split = b.add(gw, role="split")
        frags: list[tuple[str, str] | None] = [
            _fragment(child, b, activities) for child in node.children
        ]
        join = b.add(gw, role="join")
        bypass_emitted = False
        for frag in frags:
            if frag is None:
                # A silent alternative materializes as a plain bypass flow,
                # never as a task; collapse several into one.
                if not bypass_emitted:
                    b.flow(split, join)
                    bypass_emitted = True
                continue
            b.flow(split, frag[0])
            b.flow(frag[1], join)
        return split, join

    raise PrimitiveModuleUnsupported(node.descendants)


def synthesize(mdt: MdtNode, activities: dict[str, Activity]) -> ProcessModel:
    """Build the process model for an annotated decomposition tree."""
    for node in mdt.walk():
        if node.kind is ModuleKind.TRIVIAL and not node.silent:
            if node.leaf_activity not in activities:
                raise KeyError(f"activity table misses leaf {node.leaf_activity!r}")

    b = _Builder()
    start = b.add(START)
    frag = _fragment(mdt, b, activities)
    end = b.add(END)
    if frag is None:
        b.flow(start, end)
    else:
        b.flow(start, frag[0])
        b.flow(frag[1], end)
    return ProcessModel(nodes=tuple(b.nodes), flows=tuple(b.flows), entry=start, exit=end)


def structure_hash(model: ProcessModel) -> str:
    """Digest of the model's structure, stable under node-id renaming and
    under reordering of unordered gateway branches.

    Combines node-kind counts, the task multiset, the flow count, and the
    bounded trace semantics at loop bounds 0 and 1.
    """
    from .verification import enumerate_traces

    kind_counts: dict[str, int] = {}
    for n in model.nodes:
        kind_counts[n.kind] = kind_counts.get(n.kind, 0) + 1
    payload = {
        "kinds": dict(sorted(kind_counts.items())),
        "tasks": sorted(n.activity or "" for n in model.tasks()),
        "flow_count": len(model.flows),
        "traces0": sorted(list(t) for t in enumerate_traces(model, 0)),
        "traces1": sorted(list(t) for t in enumerate_traces(model, 1)),
    }
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8"))
    return digest.hexdigest()[:16]
