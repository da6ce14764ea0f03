"""Token-game oracles: bounded trace enumeration, soundness, conformance.

Tokens live on sequence flows. Tasks and XOR gateways move one token; AND
gateways synchronize all incoming flows and fork all outgoing ones. A run
completes when the end node consumes its token and nothing else remains.

Loop bounds count firings of back edges (flows whose target dominates their
source), so bound 0 still runs a repeat body once but keeps a while body at
zero executions.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import StateExplosion
from .relations import ExecutionPath
from .synthesis import AND, END, TASK, XOR, ProcessModel

__all__ = [
    "Trace",
    "SoundnessReport",
    "ConformanceResult",
    "enumerate_traces",
    "check_soundness",
    "conforms",
    "back_edges",
]

Trace = tuple[str, ...]

DEFAULT_STATE_CAP = 10**6


def _flow_maps(model: ProcessModel):
    incoming: dict[str, list[int]] = {n.id: [] for n in model.nodes}
    outgoing: dict[str, list[int]] = {n.id: [] for n in model.nodes}
    for idx, (src, dst) in enumerate(model.flows):
        outgoing[src].append(idx)
        incoming[dst].append(idx)
    return incoming, outgoing


def _dominators(model: ProcessModel) -> dict[str, frozenset[str]]:
    """Iterative dominator sets over the flow graph, rooted at the entry."""
    node_ids = [n.id for n in model.nodes]
    preds: dict[str, set[str]] = {v: set() for v in node_ids}
    for src, dst in model.flows:
        preds[dst].add(src)
    all_nodes = frozenset(node_ids)
    dom: dict[str, frozenset[str]] = {v: all_nodes for v in node_ids}
    dom[model.entry] = frozenset({model.entry})
    changed = True
    while changed:
        changed = False
        for v in node_ids:
            if v == model.entry:
                continue
            if preds[v]:
                new = frozenset.intersection(*(dom[p] for p in preds[v])) | {v}
            else:
                new = frozenset({v})
            if new != dom[v]:
                dom[v] = new
                changed = True
    return dom


def back_edges(model: ProcessModel) -> frozenset[int]:
    """Indexes of flows whose target dominates their source."""
    dom = _dominators(model)
    return frozenset(
        idx for idx, (src, dst) in enumerate(model.flows) if dst in dom[src]
    )


@dataclass(frozen=True)
class _State:
    marking: tuple[tuple[int, int], ...]  # sorted (flow index, token count)
    back_counts: tuple[int, ...]


def _mark(counts: dict[int, int]) -> tuple[tuple[int, int], ...]:
    return tuple(sorted((f, c) for f, c in counts.items() if c > 0))


def _successors(model, state: _State, incoming, outgoing, backs: list[int], bound: int | None):
    """All (next_state, fired_node, emitted_activity) moves from a state."""
    marking = dict(state.marking)
    back_index = {f: i for i, f in enumerate(backs)}
    moves: list[tuple[dict[int, int], tuple[int, ...], object, str | None]] = []
    for node in model.nodes:
        node_in = incoming[node.id]
        node_out = outgoing[node.id]
        if node.kind == AND:
            if not node_in or not all(marking.get(f, 0) > 0 for f in node_in):
                continue
            consumed = dict(marking)
            for f in node_in:
                consumed[f] -= 1
            moves.append((consumed, tuple(node_out), node, None))
        elif node.kind in (TASK, END, XOR):
            for f in node_in:
                if marking.get(f, 0) <= 0:
                    continue
                consumed = dict(marking)
                consumed[f] -= 1
                if node.kind == END:
                    moves.append((consumed, (), node, None))
                elif node.kind == TASK:
                    moves.append((consumed, tuple(node_out), node, node.activity))
                else:
                    for out in node_out:
                        moves.append((consumed, (out,), node, None))
        # the start node only fires during initialization

    results = []
    for consumed, outs, node, activity in moves:
        counts = list(state.back_counts)
        produced = dict(consumed)
        legal = True
        for f in outs:
            produced[f] = produced.get(f, 0) + 1
            if f in back_index:
                i = back_index[f]
                counts[i] += 1
                if bound is not None and counts[i] > bound:
                    legal = False
                    break
        if not legal:
            continue
        results.append((_State(_mark(produced), tuple(counts)), node, activity))
    return results


def _initial_state(model: ProcessModel, outgoing, backs: list[int]) -> _State:
    outs = outgoing[model.entry]
    if len(outs) != 1:
        raise ValueError("the start node must have exactly one outgoing flow")
    return _State(_mark({outs[0]: 1}), tuple(0 for _ in backs))


def enumerate_traces(
    model: ProcessModel,
    loop_bound: int,
    state_cap: int = DEFAULT_STATE_CAP,
) -> set[Trace]:
    """Exact set of completed traces with every back edge fired <= loop_bound."""
    if loop_bound < 0:
        raise ValueError("loop_bound must be >= 0")
    incoming, outgoing = _flow_maps(model)
    backs = sorted(back_edges(model))
    initial = _initial_state(model, outgoing, backs)

    traces: set[Trace] = set()
    seen: set[tuple[_State, Trace]] = set()
    stack: list[tuple[_State, Trace]] = [(initial, ())]
    explored = 0
    while stack:
        state, trace = stack.pop()
        if (state, trace) in seen:
            continue
        seen.add((state, trace))
        explored += 1
        if explored > state_cap:
            raise StateExplosion(state_cap)
        for nxt, node, activity in _successors(
            model, state, incoming, outgoing, backs, loop_bound
        ):
            new_trace = trace + (activity,) if activity is not None else trace
            if node.kind == END:
                if not nxt.marking:
                    traces.add(new_trace)
                continue
            stack.append((nxt, new_trace))
    return traces


@dataclass(frozen=True)
class SoundnessReport:
    sound: bool
    option_to_complete: bool
    proper_completion: bool
    dead_nodes: tuple[str, ...]
    detail: str = ""


def check_soundness(model: ProcessModel, state_cap: int = DEFAULT_STATE_CAP) -> SoundnessReport:
    """Option to complete, proper completion, and absence of dead nodes."""
    incoming, outgoing = _flow_maps(model)
    backs = sorted(back_edges(model))
    # Back-edge counters are irrelevant here: explore the untruncated space.
    initial = _initial_state(model, outgoing, [])

    end_inflows = set(incoming[model.exit])

    adjacency: dict[_State, list[_State]] = {}
    fired: set[str] = {model.entry}
    completed_states: set[_State] = set()
    proper = True
    detail = ""

    frontier = [initial]
    seen = {initial}
    while frontier:
        state = frontier.pop()
        if len(seen) > state_cap:
            raise StateExplosion(state_cap)
        marking = dict(state.marking)
        if any(marking.get(f, 0) > 0 for f in end_inflows):
            total = sum(marking.values())
            if total > 1 and proper:
                proper = False
                detail = f"end reachable with {total - 1} extra token(s)"
        succs = []
        for nxt, node, _activity in _successors(
            model, state, incoming, outgoing, backs=[], bound=None
        ):
            fired.add(node.id)
            if node.kind == END:
                if nxt.marking:
                    if proper:
                        proper = False
                        detail = "tokens remain after completion"
                else:
                    completed_states.add(state)
                continue
            succs.append(nxt)
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
        adjacency[state] = succs

    # Option to complete: walk backwards from states that can finish cleanly.
    can_complete = set(completed_states)
    changed = True
    while changed:
        changed = False
        for state, succs in adjacency.items():
            if state not in can_complete and any(s in can_complete for s in succs):
                can_complete.add(state)
                changed = True
    option = all(state in can_complete for state in seen)

    dead = tuple(sorted(n.id for n in model.nodes if n.id not in fired))
    sound = option and proper and not dead
    if not option and not detail:
        detail = "a reachable marking cannot reach completion"
    return SoundnessReport(
        sound=sound,
        option_to_complete=option,
        proper_completion=proper,
        dead_nodes=dead,
        detail=detail,
    )


@dataclass(frozen=True)
class ConformanceResult:
    ok: bool
    counterexamples: tuple[tuple[str, ...], ...]


def conforms(
    paths: list[ExecutionPath] | tuple[ExecutionPath, ...],
    model: ProcessModel,
    loop_bound: int,
    state_cap: int = DEFAULT_STATE_CAP,
) -> ConformanceResult:
    """True iff every path is one of the model's bounded traces."""
    traces = enumerate_traces(model, loop_bound, state_cap=state_cap)
    bad = tuple(p.steps for p in paths if p.steps not in traces)
    return ConformanceResult(ok=not bad, counterexamples=bad)
