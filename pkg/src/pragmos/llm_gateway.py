"""Prompt rendering, provider invocation, and response parsing.

Three provider kinds: OpenAI-style chat completions, Gemini-style
generateContent, and a replay store keyed by the prompt digest. Replaying by
digest means any template change invalidates stale recordings loudly instead
of silently answering a different question.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import httpx

from .errors import (
    HttpError,
    MalformedResponse,
    MissingActivities,
    ProviderTimeout,
    ReplayMiss,
)

__all__ = [
    "ProviderConfig",
    "LlmExchange",
    "ParsedArtifact",
    "STEPS",
    "render_prompt",
    "prompt_digest",
    "invoke",
    "parse_artifact",
    "record_replay",
    "REPAIR_INSTRUCTION",
]

STEPS = ("paths", "concurrency", "loops", "abstraction")

OPENAI_COMPATIBLE = "openai-compatible"
GEMINI_COMPATIBLE = "gemini-compatible"
REPLAY = "replay"


@dataclass
class ProviderConfig:
    provider_kind: str = REPLAY
    base_url: str = ""
    model_name: str = ""
    api_key_ref: str = "PRAGMOS_API_KEY"
    timeout: float = 60.0
    max_retries: int = 2
    replay_dir: str | None = None

    def validate(self) -> None:
        if self.provider_kind == REPLAY:
            if not self.replay_dir:
                raise ValueError("replay provider requires a replay directory")
        elif self.provider_kind in (OPENAI_COMPATIBLE, GEMINI_COMPATIBLE):
            if not self.base_url or not self.model_name:
                raise ValueError("live providers require base_url and model_name")
            if not self.api_key_ref:
                raise ValueError("live providers require an api_key_ref")
        else:
            raise ValueError(f"unknown provider kind {self.provider_kind!r}")

    @classmethod
    def from_env(cls, environ=None) -> "ProviderConfig":
        env = environ if environ is not None else os.environ
        config = cls(
            provider_kind=env.get("PRAGMOS_PROVIDER", REPLAY),
            base_url=env.get("PRAGMOS_BASE_URL", ""),
            model_name=env.get("PRAGMOS_MODEL", ""),
            replay_dir=env.get("PRAGMOS_REPLAY_DIR"),
        )
        config.validate()
        return config


@dataclass
class LlmExchange:
    step: str
    prompt_text: str
    raw_response: str
    parsed_ok: bool = False
    attempt: int = 1
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )


_PATHS_TEMPLATE = """Identify the execution paths included in the following process description:

{description}

An execution path is the ordered sequence of activity labels observed during one complete run of the process, from its first to its last activity. Enumerate every alternative execution path. If you find loops, do not include more than one iteration of them in the execution path; never re-enter a loop body. Name each activity with a short verb phrase and reuse exactly the same label wherever the same activity occurs.

Answer with a single fenced JSON code block containing a list of execution paths, each a list of activity label strings. No other JSON in the reply.
"""

_CONCURRENCY_TEMPLATE = """Consider the following process description:

{description}

and list of activities:

{activities}

Identify pairs of activities that can be executed concurrently, that is, independently of each other, in any order or in parallel. Use only labels from the list, spelled exactly as given. Answer [] if no two activities are concurrent.

Answer with a single fenced JSON code block containing a list of two-element lists of activity labels. No other JSON in the reply.
"""

_LOOPS_TEMPLATE = """Consider the following process description:

{description}

and list of activities:

{activities}

Identify sets of activities that occur within loops, that is, blocks the process may execute several times. Use only labels from the list, spelled exactly as given. Answer [] if the process has no loops.

Answer with a single fenced JSON code block containing a list of lists of activity labels. No other JSON in the reply.
"""

_ABSTRACTION_TEMPLATE = """Consider the following process description:

{description}

The following recurring path segments force a loop in the discovered process model:

{segments}

Propose one abstract activity per group of equivalent segments, so that replacing each segment by its abstract activity removes the repetition. Give every abstract activity a short, descriptive label distinct from the existing activity labels.

Answer with a single fenced JSON code block of the form {{"entries": [{{"label": "...", "variants": [["...", "..."]]}}]}} where each variants list contains the exact segments the abstract activity replaces. No other JSON in the reply.
"""

REPAIR_INSTRUCTION = (
    "\n\nYour previous answer could not be parsed: {detail}. "
    "Reply again with exactly one fenced JSON code block of the requested shape."
)


def render_prompt(
    step: str,
    description: str,
    activities: list[str] | None = None,
    *,
    segments: list[list[str]] | None = None,
) -> str:
    """Deterministic prompt for one step; the digest keys the replay store."""
    if step not in STEPS:
        raise ValueError(f"unknown step {step!r}")
    if not description or not description.strip():
        raise ValueError("description must be nonempty")
    if step == "paths":
        return _PATHS_TEMPLATE.format(description=description.strip())
    if step == "abstraction":
        if not segments:
            raise MissingActivities("the abstraction step needs the segment groups")
        rendered = json.dumps(segments, indent=2)
        return _ABSTRACTION_TEMPLATE.format(
            description=description.strip(), segments=rendered
        )
    if not activities:
        raise MissingActivities(f"step {step!r} requires the activity list")
    template = _CONCURRENCY_TEMPLATE if step == "concurrency" else _LOOPS_TEMPLATE
    return template.format(
        description=description.strip(),
        activities=json.dumps(list(activities), indent=2),
    )


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


def record_replay(replay_dir: str | Path, prompt: str, response: str) -> Path:
    directory = Path(replay_dir)
    directory.mkdir(parents=True, exist_ok=True)
    target = directory / f"{prompt_digest(prompt)}.json"
    target.write_text(
        json.dumps({"prompt": prompt, "response": response}, indent=2) + "\n",
        encoding="utf-8",
    )
    return target


def _invoke_replay(config: ProviderConfig, prompt: str) -> str:
    digest = prompt_digest(prompt)
    path = Path(config.replay_dir or "") / f"{digest}.json"
    if not path.is_file():
        raise ReplayMiss(digest)
    data = json.loads(path.read_text(encoding="utf-8"))
    return data["response"]


def _invoke_openai(config: ProviderConfig, prompt: str) -> str:
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(config.api_key_ref, "")
    if key:
        headers["Authorization"] = f"Bearer {key}"
    body = {
        "model": config.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0,
    }
    url = config.base_url.rstrip("/") + "/chat/completions"
    try:
        response = httpx.post(url, json=body, headers=headers, timeout=config.timeout)
    except httpx.TimeoutException as exc:
        raise ProviderTimeout(str(exc)) from exc
    if response.status_code != 200:
        raise HttpError(response.status_code, response.text[:200])
    try:
        return response.json()["choices"][0]["message"]["content"]
    except (KeyError, IndexError, ValueError) as exc:
        raise MalformedResponse(f"unexpected completion payload: {exc}") from exc


def _invoke_gemini(config: ProviderConfig, prompt: str) -> str:
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(config.api_key_ref, "")
    if key:
        headers["x-goog-api-key"] = key
    body = {"contents": [{"parts": [{"text": prompt}]}]}
    url = f"{config.base_url.rstrip('/')}/models/{config.model_name}:generateContent"
    try:
        response = httpx.post(url, json=body, headers=headers, timeout=config.timeout)
    except httpx.TimeoutException as exc:
        raise ProviderTimeout(str(exc)) from exc
    if response.status_code != 200:
        raise HttpError(response.status_code, response.text[:200])
    try:
        return response.json()["candidates"][0]["content"]["parts"][0]["text"]
    except (KeyError, IndexError, ValueError) as exc:
        raise MalformedResponse(f"unexpected generateContent payload: {exc}") from exc


def invoke(
    config: ProviderConfig,
    prompt: str,
    step: str = "paths",
    attempt: int = 1,
    audit: list[LlmExchange] | None = None,
) -> str:
    """One provider round trip; always appends one exchange to the audit."""
    config.validate()
    exchange = LlmExchange(step=step, prompt_text=prompt, raw_response="", attempt=attempt)
    if audit is not None:
        audit.append(exchange)
    try:
        if config.provider_kind == REPLAY:
            response = _invoke_replay(config, prompt)
        elif config.provider_kind == OPENAI_COMPATIBLE:
            response = _invoke_openai(config, prompt)
        else:
            response = _invoke_gemini(config, prompt)
    except Exception as exc:
        exchange.raw_response = f"<{type(exc).__name__}: {exc}>"
        raise
    exchange.raw_response = response
    return response


@dataclass(frozen=True)
class ParsedArtifact:
    value: object
    unknown_labels: tuple[str, ...] = ()


def _extract_json(raw: str):
    """First fenced JSON block, else the first decodable JSON value."""
    marker = "```"
    pos = raw.find(marker)
    while pos != -1:
        newline = raw.find("\n", pos)
        if newline == -1:
            break
        end = raw.find(marker, newline)
        if end == -1:
            break
        block = raw[newline + 1:end].strip()
        try:
            return json.loads(block)
        except json.JSONDecodeError:
            pos = raw.find(marker, end + len(marker))
            continue
    decoder = json.JSONDecoder()
    for i, ch in enumerate(raw):
        if ch in "[{":
            try:
                value, _ = decoder.raw_decode(raw[i:])
                return value
            except json.JSONDecodeError:
                continue
    raise MalformedResponse("no JSON value found in the response")


def _as_label(x, where: str) -> str:
    if not isinstance(x, str) or not x.strip():
        raise MalformedResponse(f"{where}: expected a nonempty label string")
    return x.strip()


def parse_artifact(step: str, raw: str, known_labels: list[str] | None = None) -> ParsedArtifact:
    """Validate a raw response against the step's expected shape.

    Labels are whitespace-trimmed but otherwise untouched; labels missing
    from `known_labels` are reported, never dropped.
    """
    value = _extract_json(raw)
    unknown: list[str] = []
    known = set(known_labels) if known_labels is not None else None

    def check_known(label: str):
        if known is not None and label not in known and label not in unknown:
            unknown.append(label)

    if step == "paths":
        if not isinstance(value, list) or not value:
            raise MalformedResponse("expected a nonempty list of execution paths")
        paths = []
        for i, path in enumerate(value):
            if not isinstance(path, list) or not path:
                raise MalformedResponse(f"path {i}: expected a nonempty list")
            paths.append([_as_label(x, f"path {i}") for x in path])
        return ParsedArtifact(paths)

    if step == "concurrency":
        if not isinstance(value, list):
            raise MalformedResponse("expected a list of activity pairs")
        pairs = []
        for i, pair in enumerate(value):
            if not isinstance(pair, list) or len(pair) != 2:
                raise MalformedResponse(f"pair {i}: expected a two-element list")
            a, b = (_as_label(x, f"pair {i}") for x in pair)
            check_known(a)
            check_known(b)
            pairs.append([a, b])
        return ParsedArtifact(pairs, tuple(unknown))

    if step == "loops":
        if not isinstance(value, list):
            raise MalformedResponse("expected a list of loop blocks")
        blocks = []
        for i, block in enumerate(value):
            if not isinstance(block, list) or not block:
                raise MalformedResponse(f"block {i}: expected a nonempty list")
            labels = [_as_label(x, f"block {i}") for x in block]
            for label in labels:
                check_known(label)
            blocks.append(labels)
        return ParsedArtifact(blocks, tuple(unknown))

    if step == "abstraction":
        if not isinstance(value, dict) or not isinstance(value.get("entries"), list):
            raise MalformedResponse('expected an object with an "entries" list')
        entries = []
        for i, entry in enumerate(value["entries"]):
            if not isinstance(entry, dict):
                raise MalformedResponse(f"entry {i}: expected an object")
            label = _as_label(entry.get("label"), f"entry {i} label")
            variants = entry.get("variants")
            if not isinstance(variants, list) or not variants:
                raise MalformedResponse(f"entry {i}: expected nonempty variants")
            parsed_variants = []
            for j, variant in enumerate(variants):
                if not isinstance(variant, list) or not variant:
                    raise MalformedResponse(f"entry {i} variant {j}: expected a nonempty list")
                labels = [_as_label(x, f"entry {i} variant {j}") for x in variant]
                for item in labels:
                    check_known(item)
                parsed_variants.append(labels)
            entries.append({"label": label, "variants": parsed_variants})
        return ParsedArtifact({"entries": entries}, tuple(unknown))

    raise ValueError(f"unknown step {step!r}")
