"""Versioned pipeline orchestration with provenance and human overrides.

Every artifact lives in an append-only slot; each version records the slot
versions it was derived from, so staleness is a property computed from the
ledger rather than a flag to keep in sync. Steps re-derive the downstream
artifacts of their stage; later stages become stale and are re-run by the
analyst in order.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import bpmn_io
from .abstraction import apply_abstraction, find_repetition_segments, table_from_entries
from .entanglement import align_path, resolve as resolve_tree
from .errors import (
    CorruptStore,
    CyclicCausality,
    EmptyDescription,
    MalformedResponse,
    PipelineError,
    PragmosError,
    SchemaViolation,
)
from .llm_gateway import (
    REPAIR_INSTRUCTION,
    LlmExchange,
    ProviderConfig,
    invoke,
    parse_artifact,
    render_prompt,
)
from .mdt import LoopMode, annotate_loop, decompose
from .relations import Activity, ExecutionPath, dfg_to_org, inject_concurrency, normalize_activities, paths_to_dfg
from .synthesis import synthesize

__all__ = [
    "ArtifactVersion",
    "ArtifactSlot",
    "SessionState",
    "STEP_NAMES",
    "STEP_SLOT",
    "create_session",
    "run_step",
    "override_artifact",
    "save_session",
    "save_session_dir",
    "load_session",
]

STEP_NAMES = ("paths", "concurrency", "loops", "resolve", "abstraction")

# the artifact slot a step owns (its other outputs are derived slots)
STEP_SLOT = {
    "paths": "paths",
    "concurrency": "concurrency",
    "loops": "loops",
    "resolve": "alignment",
    "abstraction": "abstraction",
}


class UpstreamNotCurrent(PipelineError):
    code = "upstream_not_current"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class ArtifactVersion:
    value: object
    provenance: str  # "llm" | "human" | "derived"
    parents: dict[str, int]  # slot name -> 1-based version index
    timestamp: str = field(default_factory=_now)


@dataclass
class ArtifactSlot:
    name: str
    versions: list[ArtifactVersion] = field(default_factory=list)


@dataclass
class SessionState:
    id: str
    slots: dict[str, ArtifactSlot] = field(default_factory=dict)
    audit: list[LlmExchange] = field(default_factory=list)
    activities: dict[str, Activity] = field(default_factory=dict)
    step_errors: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    # -- slot ledger ---------------------------------------------------------

    def slot(self, name: str) -> ArtifactSlot:
        if name not in bpmn_io.SLOT_NAMES:
            raise SchemaViolation(f"unknown artifact slot {name!r}")
        return self.slots.setdefault(name, ArtifactSlot(name=name))

    def latest(self, name: str) -> ArtifactVersion | None:
        slot = self.slots.get(name)
        if not slot or not slot.versions:
            return None
        return slot.versions[-1]

    def latest_index(self, name: str) -> int:
        slot = self.slots.get(name)
        return len(slot.versions) if slot else 0

    def append(self, name: str, value, provenance: str, parents: dict[str, int]) -> int:
        checked = bpmn_io.import_artifact_json(name, bpmn_io.export_artifact_json(name, value))
        self.slot(name).versions.append(
            ArtifactVersion(value=checked, provenance=provenance, parents=dict(parents))
        )
        return self.latest_index(name)

    def is_stale(self, name: str, _seen: frozenset[str] = frozenset()) -> bool:
        version = self.latest(name)
        if version is None or name in _seen:
            return False
        for parent, index in version.parents.items():
            if parent == name or parent in _seen:
                continue  # rewrites reference their own input chain
            if self.latest_index(parent) != index:
                return True
            if self.is_stale(parent, _seen | {name}):
                return True
        return False

    def step_status(self, step: str) -> str:
        if step not in STEP_NAMES:
            raise SchemaViolation(f"unknown step {step!r}")
        if self.step_errors.get(step):
            return "error"
        slot = STEP_SLOT[step]
        if self.latest(slot) is None:
            return "pending"
        if self.is_stale(slot):
            return "stale"
        return "current"

    def warn(self, message: str) -> None:
        if message not in self.warnings:
            self.warnings.append(message)

    # -- domain views ----------------------------------------------------------

    def description(self) -> str:
        version = self.latest("description")
        if version is None:
            raise EmptyDescription("the session has no description")
        return version.value["text"]

    def label_paths(self) -> list[list[str]]:
        version = self.latest("paths")
        if version is None:
            raise UpstreamNotCurrent("the paths artifact is missing")
        return [list(p) for p in version.value["paths"]]

    def corpus(self):
        return normalize_activities(self.label_paths())

    def id_for_label(self) -> dict[str, str]:
        return {a.label: a.id for a in self.activities.values()}


def create_session(description: str) -> SessionState:
    if not description or not description.strip():
        raise EmptyDescription("a process description is required")
    session = SessionState(id=uuid.uuid4().hex[:12])
    session.append("description", {"text": description}, "human", {})
    return session


# --- gateway fetch ------------------------------------------------------------


def _fetch_artifact(
    session: SessionState,
    config: ProviderConfig,
    step: str,
    prompt: str,
    known_labels: list[str] | None = None,
):
    """Invoke with parse-repair retries; returns the parsed value."""
    attempt = 1
    current = prompt
    while True:
        raw = invoke(config, current, step=step, attempt=attempt, audit=session.audit)
        try:
            parsed = parse_artifact(step, raw, known_labels)
        except MalformedResponse as exc:
            if attempt > config.max_retries:
                raise
            attempt += 1
            current = prompt + REPAIR_INSTRUCTION.format(detail=exc.detail)
            continue
        session.audit[-1].parsed_ok = True
        for label in parsed.unknown_labels:
            session.warn(f"step {step}: unknown activity label {label!r} in the response")
        return parsed.value


def _reusable_override(session: SessionState, slot: str):
    version = session.latest(slot)
    if version is not None and version.provenance == "human" and not session.is_stale(slot):
        return version
    return None


# --- derivation helpers ---------------------------------------------------------


def _refresh_activities(session: SessionState) -> None:
    corpus = session.corpus()
    silent = {a.id: a for a in session.activities.values() if a.silent}
    session.activities = dict(corpus.activities)
    session.activities.update(silent)


def _derive_relations(session: SessionState, org_parents: dict[str, int]):
    """paths (+ optional concurrency) -> org; raises CyclicCausality."""
    corpus = session.corpus()
    org = dfg_to_org(paths_to_dfg(corpus.paths))
    if "concurrency" in org_parents:
        pairs_value = session.latest("concurrency").value["pairs"]
        ids = {a.label: a.id for a in corpus.activities.values()}
        pairs = set()
        for a, b in pairs_value:
            if a in ids and b in ids:
                pairs.add((ids[a], ids[b]))
            else:
                session.warn(f"concurrency pair ({a!r}, {b!r}) names unknown activities; kept in the artifact, not injected")
        org = inject_concurrency(org, pairs)
    session.append("org", bpmn_io.org_to_value(org), "derived", org_parents)
    return org


def _derive_tree_and_model(session: SessionState, org, mdt_parents: dict[str, int], loops_value=None):
    tree = decompose(org)
    if loops_value:
        ids = session.id_for_label()
        blocks = []
        for block in loops_value["blocks"]:
            missing = [label for label in block if label not in ids]
            if missing:
                session.warn(f"loop block {block} names unknown activities {missing}; not annotated")
                continue
            blocks.append(frozenset(ids[label] for label in block))
        for i, a in enumerate(blocks):
            for b in blocks[i + 1:]:
                if a < b or b < a:
                    session.warn(
                        f"loop blocks {sorted(a)} and {sorted(b)} are nested; both annotated, review required"
                    )
        for block in blocks:
            tree = annotate_loop(tree, block, LoopMode.REPEAT)
    mdt_index = session.append("mdt", bpmn_io.mdt_to_value(tree), "derived", mdt_parents)
    model = synthesize(tree, session.activities)
    session.append("model", bpmn_io.model_to_value(model), "derived", {"mdt": mdt_index})
    return tree, model


# --- steps ---------------------------------------------------------------------


def _require_current(session: SessionState, slot: str) -> int:
    if session.latest(slot) is None:
        raise UpstreamNotCurrent(f"slot {slot!r} has no version yet")
    if session.is_stale(slot):
        raise UpstreamNotCurrent(f"slot {slot!r} is stale; re-run its step first")
    return session.latest_index(slot)


def _run_paths(session: SessionState, config: ProviderConfig) -> None:
    description_index = _require_current(session, "description")
    if _reusable_override(session, "paths") is None:
        prompt = render_prompt("paths", session.description())
        label_paths = _fetch_artifact(session, config, "paths", prompt)
        session.append("paths", {"paths": label_paths}, "llm", {"description": description_index})
    paths_index = session.latest_index("paths")
    _refresh_activities(session)
    corpus = session.corpus()
    for flag in corpus.repetitions:
        session.warn(
            f"path {flag.path_index} repeats {flag.activity_id!r} {flag.count} times; "
            "block abstraction applies"
        )
    org = _derive_relations(session, {"paths": paths_index})
    _derive_tree_and_model(session, org, {"org": session.latest_index("org")})


def _run_concurrency(session: SessionState, config: ProviderConfig) -> None:
    description_index = _require_current(session, "description")
    paths_index = _require_current(session, "paths")
    _refresh_activities(session)
    labels = session.corpus().labels()
    if _reusable_override(session, "concurrency") is None:
        prompt = render_prompt("concurrency", session.description(), labels)
        pairs = _fetch_artifact(session, config, "concurrency", prompt, known_labels=labels)
        session.append(
            "concurrency",
            {"pairs": pairs},
            "llm",
            {"description": description_index, "paths": paths_index},
        )
    org = _derive_relations(
        session,
        {"paths": paths_index, "concurrency": session.latest_index("concurrency")},
    )
    _derive_tree_and_model(session, org, {"org": session.latest_index("org")})


def _run_loops(session: SessionState, config: ProviderConfig) -> None:
    description_index = _require_current(session, "description")
    paths_index = _require_current(session, "paths")
    org_index = _require_current(session, "org")
    _refresh_activities(session)
    labels = session.corpus().labels()
    if _reusable_override(session, "loops") is None:
        prompt = render_prompt("loops", session.description(), labels)
        blocks = _fetch_artifact(session, config, "loops", prompt, known_labels=labels)
        session.append(
            "loops",
            {"blocks": blocks},
            "llm",
            {"description": description_index, "paths": paths_index},
        )
    org = bpmn_io.value_to_org(session.latest("org").value)
    _derive_tree_and_model(
        session,
        org,
        {"org": org_index, "loops": session.latest_index("loops")},
        loops_value=session.latest("loops").value,
    )


def _run_resolve(session: SessionState, config: ProviderConfig) -> None:
    paths_index = _require_current(session, "paths")
    mdt_index = _require_current(session, "mdt")
    _refresh_activities(session)
    tree = bpmn_io.value_to_mdt(session.latest("mdt").value)
    corpus = session.corpus()
    reports = [align_path(path, tree) for path in corpus.paths]
    alignment_value = {
        "reports": [
            {
                "path": list(r.path.steps),
                "fit": r.fit,
                "missed_loops": [sorted(b) for b in r.missed_loop_modules],
                "skips": [sorted(b) for b in r.skipped_blocks],
                "unknown": list(r.unknown_activities),
                "residue": list(r.residue),
            }
            for r in reports
        ]
    }
    alignment_index = session.append(
        "alignment", alignment_value, "derived", {"paths": paths_index, "mdt": mdt_index}
    )
    fixed, resolutions = resolve_tree(tree, reports)
    if not resolutions:
        return
    for resolution in resolutions:
        if resolution.tau_id:
            session.activities[resolution.tau_id] = Activity(
                id=resolution.tau_id,
                label=f"skip {'+'.join(sorted(resolution.module))}",
                silent=True,
            )
    new_mdt_index = session.append(
        "mdt",
        bpmn_io.mdt_to_value(fixed),
        "derived",
        {"mdt": mdt_index, "alignment": alignment_index},
    )
    model = synthesize(fixed, session.activities)
    session.append("model", bpmn_io.model_to_value(model), "derived", {"mdt": new_mdt_index})


def _run_abstraction(session: SessionState, config: ProviderConfig) -> None:
    description_index = _require_current(session, "description")
    paths_index = _require_current(session, "paths")
    label_paths = session.label_paths()
    groups = find_repetition_segments(label_paths)
    if _reusable_override(session, "abstraction") is None:
        segments = [list(v) for g in groups for v in g.variants()]
        prompt = render_prompt("abstraction", session.description(), segments=segments)
        value = _fetch_artifact(session, config, "abstraction", prompt)
        session.append(
            "abstraction",
            value,
            "llm",
            {"description": description_index, "paths": paths_index},
        )
    entries = session.latest("abstraction").value["entries"]
    existing = {label for path in label_paths for label in path}
    table = table_from_entries(entries, existing)
    abstracted = apply_abstraction(label_paths, table)
    new_paths_index = session.append(
        "paths",
        {"paths": abstracted},
        "derived",
        {"paths": paths_index, "abstraction": session.latest_index("abstraction")},
    )
    session.step_errors.pop("paths", None)
    _refresh_activities(session)
    org = _derive_relations(session, {"paths": new_paths_index})
    ids = {e.id for e in table.entries}
    for (a, b), entry in org.pairs():
        if a in ids and b in ids and entry.kind.value == "concurrent":
            session.warn(
                f"abstract activities {a!r} and {b!r} were classified concurrent; "
                "review whether they may truly run in parallel"
            )
    _derive_tree_and_model(session, org, {"org": session.latest_index("org")})


_STEP_RUNNERS = {
    "paths": _run_paths,
    "concurrency": _run_concurrency,
    "loops": _run_loops,
    "resolve": _run_resolve,
    "abstraction": _run_abstraction,
}


def run_step(session: SessionState, step: str, config: ProviderConfig) -> SessionState:
    """Execute one pipeline step; errors are recorded and re-raised, prior
    versions stay untouched."""
    if step not in STEP_NAMES:
        raise SchemaViolation(f"unknown step {step!r}")
    session.step_errors.pop(step, None)
    try:
        _STEP_RUNNERS[step](session, config)
    except PragmosError as exc:
        session.step_errors[step] = f"{exc.code}: {exc}"
        raise
    return session


def override_artifact(session: SessionState, slot: str, value) -> SessionState:
    """Append a human version; downstream slots become stale by derivation."""
    if slot not in bpmn_io.SLOT_NAMES:
        raise SchemaViolation(f"unknown artifact slot {slot!r}")
    checked = bpmn_io.import_artifact_json(slot, bpmn_io.export_artifact_json(slot, value))
    parents: dict[str, int] = {}
    for ancestor in _OVERRIDE_PARENTS.get(slot, ()):  # what the analyst saw
        if session.latest(ancestor) is not None:
            parents[ancestor] = session.latest_index(ancestor)
    session.slot(slot).versions.append(
        ArtifactVersion(value=checked, provenance="human", parents=parents)
    )
    if slot == "paths":
        _refresh_activities(session)
    return session


_OVERRIDE_PARENTS = {
    "description": (),
    "paths": ("description",),
    "concurrency": ("description", "paths"),
    "loops": ("description", "paths"),
    "org": ("paths", "concurrency"),
    "mdt": ("org", "loops"),
    "alignment": ("paths", "mdt"),
    "abstraction": ("description", "paths"),
    "model": ("mdt",),
}


# --- persistence -----------------------------------------------------------------


def save_session(session: SessionState, root: str | Path) -> Path:
    """Write the store layout under <root>/<session-id>/."""
    return save_session_dir(session, Path(root) / session.id)


def save_session_dir(session: SessionState, base: str | Path) -> Path:
    """Write session.json, artifacts/, audit/, exports/ into one directory."""
    base = Path(base)
    (base / "artifacts").mkdir(parents=True, exist_ok=True)
    (base / "audit").mkdir(exist_ok=True)
    (base / "exports").mkdir(exist_ok=True)

    index = {
        "id": session.id,
        "activities": {
            a.id: {"label": a.label, "silent": a.silent}
            for a in session.activities.values()
        },
        "step_errors": dict(session.step_errors),
        "warnings": list(session.warnings),
        "slots": {
            name: [
                {
                    "provenance": v.provenance,
                    "parents": v.parents,
                    "timestamp": v.timestamp,
                }
                for v in slot.versions
            ]
            for name, slot in session.slots.items()
        },
    }
    (base / "session.json").write_text(
        json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for name, slot in session.slots.items():
        for k, version in enumerate(slot.versions, start=1):
            path = base / "artifacts" / f"{name}-v{k}.json"
            path.write_text(bpmn_io.export_artifact_json(name, version.value), encoding="utf-8")
    for seq, exchange in enumerate(session.audit, start=1):
        record = {
            "step": exchange.step,
            "prompt": exchange.prompt_text,
            "response": exchange.raw_response,
            "parsed_ok": exchange.parsed_ok,
            "attempt": exchange.attempt,
            "timestamp": exchange.timestamp,
        }
        (base / "audit" / f"{seq:04d}.json").write_text(
            json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    model_slot = session.slots.get("model")
    if model_slot:
        for k, version in enumerate(model_slot.versions, start=1):
            model = bpmn_io.value_to_model(version.value)
            xml = bpmn_io.export_bpmn_xml(model, session.activities)
            (base / "exports" / f"model-v{k}.bpmn").write_text(xml, encoding="utf-8")
    return base


def load_session(root: str | Path, session_id: str | None = None) -> SessionState:
    """Rebuild a session from its store directory."""
    base = Path(root)
    if session_id is not None:
        base = base / session_id
    index_path = base / "session.json"
    try:
        index = json.loads(index_path.read_text(encoding="utf-8"))
        session = SessionState(id=index["id"])
        session.activities = {
            aid: Activity(id=aid, label=meta["label"], silent=bool(meta.get("silent")))
            for aid, meta in index.get("activities", {}).items()
        }
        session.step_errors = dict(index.get("step_errors", {}))
        session.warnings = list(index.get("warnings", []))
        for name, versions in index.get("slots", {}).items():
            slot = session.slot(name)
            for k, meta in enumerate(versions, start=1):
                text = (base / "artifacts" / f"{name}-v{k}.json").read_text(encoding="utf-8")
                value = bpmn_io.import_artifact_json(name, text)
                slot.versions.append(
                    ArtifactVersion(
                        value=value,
                        provenance=meta["provenance"],
                        parents={k2: int(v2) for k2, v2 in meta["parents"].items()},
                        timestamp=meta["timestamp"],
                    )
                )
        for record_path in sorted((base / "audit").glob("*.json")):
            record = json.loads(record_path.read_text(encoding="utf-8"))
            session.audit.append(
                LlmExchange(
                    step=record["step"],
                    prompt_text=record["prompt"],
                    raw_response=record["response"],
                    parsed_ok=bool(record["parsed_ok"]),
                    attempt=int(record["attempt"]),
                    timestamp=record["timestamp"],
                )
            )
    except (OSError, KeyError, ValueError, SchemaViolation) as exc:
        raise CorruptStore(f"cannot load session from {base}: {exc}") from exc
    return session
