"""Serialization: BPMN 2.0 XML export and the artifact JSON interchange.

Exports are byte-stable: elements follow the model's deterministic node and
flow order, and JSON is emitted with sorted keys. The XML reader only
accepts the exported element subset; it exists so the command line can
replay and check previously exported files, not as a general BPMN importer.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from xml.sax.saxutils import escape, quoteattr

from .errors import SchemaViolation
from .mdt import LoopMode, MdtNode, ModuleKind
from .relations import Activity, Org, RelationKind, _Rel, verify_org
from .synthesis import FlowNode, ProcessModel

__all__ = [
    "export_bpmn_xml",
    "parse_bpmn_xml",
    "export_artifact_json",
    "import_artifact_json",
    "SLOT_NAMES",
    "org_to_value",
    "value_to_org",
    "mdt_to_value",
    "value_to_mdt",
    "model_to_value",
    "value_to_model",
]

BPMN_NS = "http://www.omg.org/spec/BPMN/20100524/MODEL"

_ELEMENT_FOR_KIND = {
    "start": "startEvent",
    "end": "endEvent",
    "task": "task",
    "xor_gateway": "exclusiveGateway",
    "and_gateway": "parallelGateway",
}
_KIND_FOR_ELEMENT = {v: k for k, v in _ELEMENT_FOR_KIND.items()}


def export_bpmn_xml(model: ProcessModel, activities: dict[str, Activity]) -> str:
    """One definitions/process document over the exported element subset."""
    incoming: dict[str, list[str]] = {n.id: [] for n in model.nodes}
    outgoing: dict[str, list[str]] = {n.id: [] for n in model.nodes}
    flow_ids = []
    for idx, (src, dst) in enumerate(model.flows):
        fid = f"f{idx}"
        flow_ids.append(fid)
        outgoing[src].append(fid)
        incoming[dst].append(fid)

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<definitions xmlns="{BPMN_NS}" id="definitions-1" '
        'targetNamespace="urn:pragmos">',
        '  <process id="process-1" isExecutable="false">',
    ]
    for node in model.nodes:
        element = _ELEMENT_FOR_KIND[node.kind]
        attrs = [f"id={quoteattr(node.id)}"]
        if node.kind == "task":
            act = activities.get(node.activity or "")
            label = act.label if act else (node.activity or "")
            attrs.append(f"name={quoteattr(label)}")
        if node.gateway_role:
            direction = "Diverging" if node.gateway_role == "split" else "Converging"
            attrs.append(f"gatewayDirection={quoteattr(direction)}")
        refs = [f"      <incoming>{escape(f)}</incoming>" for f in incoming[node.id]]
        refs += [f"      <outgoing>{escape(f)}</outgoing>" for f in outgoing[node.id]]
        if refs:
            lines.append(f"    <{element} {' '.join(attrs)}>")
            lines.extend(refs)
            lines.append(f"    </{element}>")
        else:
            lines.append(f"    <{element} {' '.join(attrs)}/>")
    for idx, (src, dst) in enumerate(model.flows):
        lines.append(
            f'    <sequenceFlow id="f{idx}" sourceRef={quoteattr(src)} '
            f"targetRef={quoteattr(dst)}/>"
        )
    lines.append("  </process>")
    lines.append("</definitions>")
    return "\n".join(lines) + "\n"


def parse_bpmn_xml(text: str) -> tuple[ProcessModel, dict[str, Activity]]:
    """Read back an exported document; rejects anything outside the subset."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise SchemaViolation(f"not well-formed XML: {exc}") from exc
    if root.tag != f"{{{BPMN_NS}}}definitions":
        raise SchemaViolation("root element must be a BPMN definitions element")
    processes = [child for child in root if child.tag == f"{{{BPMN_NS}}}process"]
    if len(processes) != 1:
        raise SchemaViolation("expected exactly one process element")

    nodes: list[FlowNode] = []
    flows: list[tuple[str, str]] = []
    activities: dict[str, Activity] = {}
    entry = exit_ = None
    for element in processes[0]:
        tag = element.tag.removeprefix(f"{{{BPMN_NS}}}")
        if tag == "sequenceFlow":
            flows.append((element.attrib["sourceRef"], element.attrib["targetRef"]))
            continue
        if tag not in _KIND_FOR_ELEMENT:
            raise SchemaViolation(f"unsupported element <{tag}>")
        kind = _KIND_FOR_ELEMENT[tag]
        node_id = element.attrib["id"]
        activity = None
        role = None
        if kind == "task":
            from .relations import slugify

            label = element.attrib.get("name", node_id)
            activity = slugify(label)
            suffix = 2
            while activity in activities and activities[activity].label != label:
                activity = f"{slugify(label)}-{suffix}"
                suffix += 1
            activities[activity] = Activity(activity, label)
        if kind in ("xor_gateway", "and_gateway"):
            direction = element.attrib.get("gatewayDirection", "")
            role = {"Diverging": "split", "Converging": "join"}.get(direction)
        if kind == "start":
            entry = node_id
        if kind == "end":
            exit_ = node_id
        nodes.append(FlowNode(node_id, kind, activity=activity, gateway_role=role))
    if entry is None or exit_ is None:
        raise SchemaViolation("model needs one start and one end event")
    model = ProcessModel(nodes=tuple(nodes), flows=tuple(flows), entry=entry, exit=exit_)
    return model, activities


# --- artifact JSON -----------------------------------------------------------

SLOT_NAMES = (
    "description",
    "paths",
    "org",
    "concurrency",
    "loops",
    "mdt",
    "alignment",
    "abstraction",
    "model",
)


def _expect(cond: bool, message: str, location: str):
    if not cond:
        raise SchemaViolation(message, location)


def _check_label_matrix(value, key: str, row_len: int | None = None):
    _expect(isinstance(value, dict), "object expected", "/")
    _expect(key in value, f"missing key {key!r}", "/")
    rows = value[key]
    _expect(isinstance(rows, list), "list expected", f"/{key}")
    for i, row in enumerate(rows):
        _expect(isinstance(row, list) and row, "nonempty list expected", f"/{key}/{i}")
        if row_len is not None:
            _expect(len(row) == row_len, f"{row_len} entries expected", f"/{key}/{i}")
        for j, label in enumerate(row):
            _expect(
                isinstance(label, str) and label.strip() != "",
                "nonempty string expected",
                f"/{key}/{i}/{j}",
            )
    return {key: [[str(x) for x in row] for row in rows]}


def org_to_value(org: Org) -> dict:
    rel = []
    for (a, b), entry in sorted(org.pairs(), key=lambda kv: kv[0]):
        row: list[str] = [a, b, entry.kind.value]
        if entry.kind is RelationKind.PRECEDES and entry.orient == "ba":
            row.append("ba")
        elif entry.kind is RelationKind.CONCURRENT and entry.orient in ("ab", "ba"):
            row.append(entry.orient)
        rel.append(row)
    return {"nodes": sorted(org.nodes), "rel": rel}


def value_to_org(value: dict) -> Org:
    _expect(isinstance(value, dict), "object expected", "/")
    _expect("nodes" in value, "missing key 'nodes'", "/")
    _expect("rel" in value, "missing key 'rel'", "/")
    nodes = value["nodes"]
    _expect(
        isinstance(nodes, list) and all(isinstance(n, str) for n in nodes),
        "list of id strings expected",
        "/nodes",
    )
    node_set = frozenset(nodes)
    rel: dict[tuple[str, str], _Rel] = {}
    kinds = {k.value for k in RelationKind}
    for i, row in enumerate(value["rel"]):
        loc = f"/rel/{i}"
        _expect(isinstance(row, list) and len(row) in (3, 4), "3 or 4 entries expected", loc)
        a, b, kind = row[0], row[1], row[2]
        _expect(a in node_set and b in node_set, "unknown node id", loc)
        _expect(a < b, "pair must be lexicographically ordered", loc)
        _expect(kind in kinds, f"kind must be one of {sorted(kinds)}", loc)
        orient = None
        if len(row) == 4:
            _expect(row[3] in ("ab", "ba"), "orientation must be 'ab' or 'ba'", loc)
            _expect(kind != RelationKind.CONFLICT.value, "conflict has no orientation", loc)
            orient = row[3]
        if kind == RelationKind.PRECEDES.value and orient is None:
            orient = "ab"
        rel[(a, b)] = _Rel(RelationKind(kind), orient)
    ordered = sorted(node_set)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            _expect((a, b) in rel, f"pair ({a}, {b}) unclassified", "/rel")
    org = Org(nodes=node_set, rel=rel)
    diagnostics = verify_org(org)
    _expect(
        not diagnostics,
        "; ".join(f"{d.rule} on {d.pair}" for d in diagnostics) or "invalid graph",
        "/rel",
    )
    return org


def mdt_to_value(node: MdtNode) -> dict:
    value: dict = {"kind": node.kind.value, "loop": node.loop.value}
    if node.kind is ModuleKind.TRIVIAL:
        value["activity"] = node.leaf_activity
        if node.silent:
            value["silent"] = True
    else:
        value["children"] = [mdt_to_value(c) for c in node.children]
    return value


def value_to_mdt(value: dict, location: str = "") -> MdtNode:
    _expect(isinstance(value, dict), "object expected", location or "/")
    kind = value.get("kind")
    _expect(kind in {k.value for k in ModuleKind}, "unknown module kind", f"{location}/kind")
    loop = value.get("loop", "none")
    _expect(loop in {m.value for m in LoopMode}, "unknown loop mode", f"{location}/loop")
    if kind == ModuleKind.TRIVIAL.value:
        activity = value.get("activity")
        _expect(
            isinstance(activity, str) and activity,
            "trivial node needs an activity",
            f"{location}/activity",
        )
        return MdtNode(
            kind=ModuleKind.TRIVIAL,
            children=(),
            descendants=frozenset({activity}),
            leaf_activity=activity,
            loop=LoopMode(loop),
            silent=bool(value.get("silent", False)),
        )
    children_value = value.get("children")
    _expect(
        isinstance(children_value, list) and len(children_value) >= 2,
        "internal node needs >= 2 children",
        f"{location}/children",
    )
    children = tuple(
        value_to_mdt(c, f"{location}/children/{i}") for i, c in enumerate(children_value)
    )
    total = sum(len(c.descendants) for c in children)
    descendants = frozenset().union(*(c.descendants for c in children))
    _expect(
        len(descendants) == total,
        "sibling descendant sets must be disjoint",
        f"{location}/children",
    )
    return MdtNode(
        kind=ModuleKind(kind),
        children=children,
        descendants=descendants,
        loop=LoopMode(loop),
    )


def model_to_value(model: ProcessModel) -> dict:
    nodes = []
    for n in model.nodes:
        row: dict = {"id": n.id, "kind": n.kind}
        if n.activity is not None:
            row["activity"] = n.activity
        if n.gateway_role is not None:
            row["gateway_role"] = n.gateway_role
        nodes.append(row)
    return {
        "nodes": nodes,
        "flows": [[a, b] for a, b in model.flows],
        "entry": model.entry,
        "exit": model.exit,
    }


def value_to_model(value: dict) -> ProcessModel:
    _expect(isinstance(value, dict), "object expected", "/")
    for key in ("nodes", "flows", "entry", "exit"):
        _expect(key in value, f"missing key {key!r}", "/")
    nodes = []
    ids = set()
    for i, row in enumerate(value["nodes"]):
        loc = f"/nodes/{i}"
        _expect(isinstance(row, dict), "object expected", loc)
        _expect(isinstance(row.get("id"), str), "id string expected", f"{loc}/id")
        kind = row.get("kind")
        _expect(kind in _ELEMENT_FOR_KIND, "unknown node kind", f"{loc}/kind")
        role = row.get("gateway_role")
        _expect(role in (None, "split", "join"), "role must be split or join", f"{loc}/gateway_role")
        nodes.append(
            FlowNode(row["id"], kind, activity=row.get("activity"), gateway_role=role)
        )
        ids.add(row["id"])
    flows = []
    for i, row in enumerate(value["flows"]):
        loc = f"/flows/{i}"
        _expect(isinstance(row, list) and len(row) == 2, "pair expected", loc)
        _expect(row[0] in ids and row[1] in ids, "unknown node id", loc)
        flows.append((row[0], row[1]))
    _expect(value["entry"] in ids, "unknown entry id", "/entry")
    _expect(value["exit"] in ids, "unknown exit id", "/exit")
    return ProcessModel(
        nodes=tuple(nodes), flows=tuple(flows), entry=value["entry"], exit=value["exit"]
    )


def _validate_description(value):
    _expect(isinstance(value, dict), "object expected", "/")
    text = value.get("text")
    _expect(isinstance(text, str) and text.strip() != "", "nonempty text expected", "/text")
    return {"text": text}


def _validate_alignment(value):
    _expect(isinstance(value, dict), "object expected", "/")
    reports = value.get("reports")
    _expect(isinstance(reports, list), "list expected", "/reports")
    out = []
    for i, report in enumerate(reports):
        loc = f"/reports/{i}"
        _expect(isinstance(report, dict), "object expected", loc)
        _expect(isinstance(report.get("path"), list), "path list expected", f"{loc}/path")
        _expect(isinstance(report.get("fit"), bool), "fit boolean expected", f"{loc}/fit")
        for key in ("missed_loops", "skips"):
            _expect(isinstance(report.get(key, []), list), "list expected", f"{loc}/{key}")
        out.append(
            {
                "path": [str(x) for x in report["path"]],
                "fit": report["fit"],
                "missed_loops": [sorted(map(str, b)) for b in report.get("missed_loops", [])],
                "skips": [sorted(map(str, b)) for b in report.get("skips", [])],
                "unknown": [str(x) for x in report.get("unknown", [])],
                "residue": [str(x) for x in report.get("residue", [])],
            }
        )
    return {"reports": out}


def _validate_abstraction(value):
    _expect(isinstance(value, dict), "object expected", "/")
    entries = value.get("entries")
    _expect(isinstance(entries, list), "list expected", "/entries")
    out = []
    for i, entry in enumerate(entries):
        loc = f"/entries/{i}"
        _expect(isinstance(entry, dict), "object expected", loc)
        _expect(
            isinstance(entry.get("label"), str) and entry["label"].strip() != "",
            "label expected",
            f"{loc}/label",
        )
        variants = entry.get("variants")
        _expect(isinstance(variants, list) and variants, "variants expected", f"{loc}/variants")
        for j, variant in enumerate(variants):
            _expect(
                isinstance(variant, list)
                and variant
                and all(isinstance(x, str) and x.strip() for x in variant),
                "label sequence expected",
                f"{loc}/variants/{j}",
            )
        row = {"label": entry["label"], "variants": [[str(x) for x in v] for v in variants]}
        if "id" in entry:
            _expect(isinstance(entry["id"], str) and entry["id"], "id string expected", f"{loc}/id")
            row["id"] = entry["id"]
        out.append(row)
    return {"entries": out}


def _validate_slot_value(slot: str, value):
    if slot == "description":
        return _validate_description(value)
    if slot == "paths":
        return _check_label_matrix(value, "paths")
    if slot == "concurrency":
        return _check_label_matrix(value, "pairs", row_len=2)
    if slot == "loops":
        return _check_label_matrix(value, "blocks")
    if slot == "org":
        return org_to_value(value_to_org(value))
    if slot == "mdt":
        return mdt_to_value(value_to_mdt(value))
    if slot == "alignment":
        return _validate_alignment(value)
    if slot == "abstraction":
        return _validate_abstraction(value)
    if slot == "model":
        return model_to_value(value_to_model(value))
    raise SchemaViolation(f"unknown artifact slot {slot!r}")


def export_artifact_json(slot: str, value) -> str:
    checked = _validate_slot_value(slot, value)
    return json.dumps(checked, indent=2, sort_keys=True) + "\n"


def import_artifact_json(slot: str, text: str):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"invalid JSON: {exc}") from exc
    return _validate_slot_value(slot, raw)
