"""Command line for batch and scripted access to the pipeline.

Sessions are addressed by directory path, so nothing here needs a running
service. Exit codes: 0 success, 2 usage, 3 provider, 4 pipeline, 5
validation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bpmn_io
from .errors import PipelineError, ProviderError, CyclicCausality, ValidationError
from .llm_gateway import ProviderConfig, record_replay
from .session import (
    STEP_NAMES,
    create_session,
    load_session,
    override_artifact,
    run_step,
    save_session_dir,
)
from .synthesis import structure_hash
from .verification import check_soundness, enumerate_traces

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PROVIDER = 3
EXIT_PIPELINE = 4
EXIT_VALIDATION = 5

RUN_SEQUENCE = ("paths", "concurrency", "loops", "resolve")


def _provider_config(args) -> ProviderConfig:
    config = ProviderConfig(
        provider_kind=os.environ.get("PRAGMOS_PROVIDER", "replay"),
        base_url=os.environ.get("PRAGMOS_BASE_URL", ""),
        model_name=os.environ.get("PRAGMOS_MODEL", ""),
        replay_dir=os.environ.get("PRAGMOS_REPLAY_DIR"),
    )
    if getattr(args, "provider", None):
        config.provider_kind = args.provider
    if getattr(args, "replay_dir", None):
        config.replay_dir = args.replay_dir
    config.validate()
    return config


def _emit(args, payload: dict, text_lines: list[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


def _load_model(path: str):
    text = Path(path).read_text(encoding="utf-8")
    return bpmn_io.parse_bpmn_xml(text)


def _export_model(session, out: str, fmt: str, version: int | None) -> None:
    slot = session.slots.get("model")
    if not slot or not slot.versions:
        raise PipelineError("the session has no model yet")
    index = version or len(slot.versions)
    if not 1 <= index <= len(slot.versions):
        raise PipelineError(f"the session has no model version {index}")
    value = slot.versions[index - 1].value
    model = bpmn_io.value_to_model(value)
    if fmt == "bpmn":
        Path(out).write_text(
            bpmn_io.export_bpmn_xml(model, session.activities), encoding="utf-8"
        )
    else:
        Path(out).write_text(
            bpmn_io.export_artifact_json("model", value), encoding="utf-8"
        )


def _cmd_run(args) -> int:
    description = Path(args.description).read_text(encoding="utf-8").strip()
    config = _provider_config(args)
    session = create_session(description)
    executed = []
    for step in RUN_SEQUENCE:
        try:
            run_step(session, step, config)
            executed.append(step)
        except CyclicCausality:
            if step != "paths":
                raise
            executed.append(step)
            run_step(session, "abstraction", config)
            executed.append("abstraction")
    if args.session:
        save_session_dir(session, args.session)
    if args.out:
        _export_model(session, args.out, "bpmn", None)
    model = bpmn_io.value_to_model(session.latest("model").value)
    payload = {
        "session": session.id,
        "steps": executed,
        "model_hash": structure_hash(model),
        "warnings": session.warnings,
    }
    _emit(
        args,
        payload,
        [f"session {session.id}: ran {', '.join(executed)}", f"model hash {payload['model_hash']}"]
        + [f"warning: {w}" for w in session.warnings],
    )
    return EXIT_OK


def _cmd_step(args) -> int:
    config = _provider_config(args)
    session = load_session(args.session)
    run_step(session, args.name, config)
    save_session_dir(session, args.session)
    status = {step: session.step_status(step) for step in STEP_NAMES}
    _emit(
        args,
        {"session": session.id, "step": args.name, "status": status},
        [f"step {args.name} done; status: " + ", ".join(f"{k}={v}" for k, v in status.items())],
    )
    return EXIT_OK


def _cmd_override(args) -> int:
    session = load_session(args.session)
    if args.file:
        text = Path(args.file).read_text(encoding="utf-8")
    else:
        text = sys.stdin.read()
    value = bpmn_io.import_artifact_json(args.slot, text)
    override_artifact(session, args.slot, value)
    save_session_dir(session, args.session)
    _emit(
        args,
        {"session": session.id, "slot": args.slot, "version": session.latest_index(args.slot)},
        [f"slot {args.slot} now at version {session.latest_index(args.slot)} (human)"],
    )
    return EXIT_OK


def _cmd_export(args) -> int:
    session = load_session(args.session)
    _export_model(session, args.out, args.format, args.version)
    _emit(args, {"out": args.out, "format": args.format}, [f"wrote {args.out}"])
    return EXIT_OK


def _cmd_traces(args) -> int:
    model, _ = _load_model(args.model)
    traces = sorted(enumerate_traces(model, args.loop_bound))
    _emit(
        args,
        {"traces": [list(t) for t in traces], "loop_bound": args.loop_bound},
        [" -> ".join(t) for t in traces],
    )
    return EXIT_OK


def _cmd_check(args) -> int:
    model, _ = _load_model(args.model)
    report = check_soundness(model)
    payload = {
        "sound": report.sound,
        "option_to_complete": report.option_to_complete,
        "proper_completion": report.proper_completion,
        "dead_nodes": list(report.dead_nodes),
        "detail": report.detail,
    }
    lines = [f"sound: {report.sound}"]
    if not report.sound:
        lines.append(f"detail: {report.detail or 'see report'}")
        if report.dead_nodes:
            lines.append(f"dead nodes: {', '.join(report.dead_nodes)}")
    _emit(args, payload, lines)
    return EXIT_OK if report.sound else EXIT_PIPELINE


def _cmd_replay_record(args) -> int:
    session = load_session(args.session)
    recorded = 0
    for exchange in session.audit:
        if exchange.parsed_ok:
            record_replay(args.replay_dir, exchange.prompt_text, exchange.raw_response)
            recorded += 1
    _emit(
        args,
        {"recorded": recorded, "replay_dir": args.replay_dir},
        [f"recorded {recorded} exchange(s) into {args.replay_dir}"],
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pragmos",
        description=(
            "Derive sound, block-structured BPMN models from natural-language "
            "process descriptions through inspectable intermediate artifacts."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_provider_flags(p):
        p.add_argument("--provider", choices=["replay", "openai-compatible", "gemini-compatible"], help="provider kind (default: PRAGMOS_PROVIDER or replay)")
        p.add_argument("--replay-dir", help="directory of recorded exchanges for the replay provider")

    def add_json_flag(p):
        p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("run", help="create a session and run the whole pipeline")
    p.add_argument("description", help="file containing the process description")
    p.add_argument("--session", help="directory to persist the session into")
    p.add_argument("--out", help="write the final model as BPMN XML to this file")
    add_provider_flags(p)
    add_json_flag(p)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("step", help="run one pipeline step on an existing session")
    p.add_argument("name", choices=list(STEP_NAMES))
    p.add_argument("--session", required=True, help="session directory")
    add_provider_flags(p)
    add_json_flag(p)
    p.set_defaults(fn=_cmd_step)

    p = sub.add_parser("override", help="submit a human version of an artifact")
    p.add_argument("--session", required=True, help="session directory")
    p.add_argument("--slot", required=True, choices=list(bpmn_io.SLOT_NAMES))
    p.add_argument("--file", help="JSON file with the value (default: stdin)")
    add_json_flag(p)
    p.set_defaults(fn=_cmd_override)

    p = sub.add_parser("export", help="export a model version")
    p.add_argument("--session", required=True, help="session directory")
    p.add_argument("--format", choices=["bpmn", "json"], default="bpmn")
    p.add_argument("--version", type=int, help="model version (default: latest)")
    p.add_argument("--out", required=True, help="output file")
    add_json_flag(p)
    p.set_defaults(fn=_cmd_export)

    p = sub.add_parser("traces", help="enumerate the bounded traces of a model")
    p.add_argument("model", help="a BPMN file exported by this tool")
    p.add_argument("--loop-bound", type=int, default=0, help="max back-edge firings per loop")
    add_json_flag(p)
    p.set_defaults(fn=_cmd_traces)

    p = sub.add_parser("check", help="check a model for soundness")
    p.add_argument("model", help="a BPMN file exported by this tool")
    add_json_flag(p)
    p.set_defaults(fn=_cmd_check)

    p = sub.add_parser("replay-record", help="write a session's exchanges into a replay directory")
    p.add_argument("--session", required=True, help="session directory")
    p.add_argument("--replay-dir", required=True, help="target replay directory")
    add_json_flag(p)
    p.set_defaults(fn=_cmd_replay_record)

    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PipelineError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
