"""Exception hierarchy shared across the pipeline.

Errors fall into four families, mirrored by the CLI exit codes and the
HTTP error mapping: usage, validation, provider, and pipeline.
"""

from __future__ import annotations


class PragmosError(Exception):
    """Base class for all package errors."""

    code = "error"


# --- validation -------------------------------------------------------------

class ValidationError(PragmosError):
    code = "validation"


class EmptyPath(ValidationError):
    code = "empty_path"


class EmptyDescription(ValidationError):
    code = "empty_description"


class SchemaViolation(ValidationError):
    """Artifact JSON does not match its slot schema.

    `location` is a JSON-pointer-style path to the offending element.
    """

    code = "schema_violation"

    def __init__(self, message: str, location: str = "/"):
        super().__init__(f"{location}: {message}")
        self.location = location
        self.reason = message


class CorruptStore(ValidationError):
    code = "corrupt_store"


# --- provider ---------------------------------------------------------------

class ProviderError(PragmosError):
    code = "provider"


class ProviderTimeout(ProviderError):
    code = "provider_timeout"


class ReplayMiss(ProviderError):
    code = "replay_miss"

    def __init__(self, digest: str):
        super().__init__(f"no recorded exchange for prompt digest {digest}")
        self.digest = digest


class HttpError(ProviderError):
    code = "http_error"

    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"provider returned HTTP {status}: {detail}".rstrip(": "))
        self.status = status


class MalformedResponse(ProviderError):
    code = "malformed_response"

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class MissingActivities(ProviderError):
    code = "missing_activities"


# --- pipeline ---------------------------------------------------------------

class PipelineError(PragmosError):
    code = "pipeline"


class CyclicCausality(PipelineError):
    """The causality digraph contains a cycle; block abstraction is required."""

    code = "cyclic_causality"

    def __init__(self, cycle: list[str]):
        super().__init__(f"causality cycle: {' -> '.join(cycle)}")
        self.cycle = cycle


class ConflictingEvidence(PipelineError):
    """A reported concurrency pair is classified as conflict in the graph."""

    code = "conflicting_evidence"

    def __init__(self, pair: tuple[str, str]):
        super().__init__(f"pair {pair} is in conflict; concurrency evidence rejected")
        self.pair = pair


class LoopNotAModule(PipelineError):
    code = "loop_not_a_module"

    def __init__(self, block: frozenset[str], nearest: frozenset[str]):
        super().__init__(
            f"loop block {sorted(block)} is not a module; "
            f"smallest enclosing module is {sorted(nearest)}"
        )
        self.block = block
        self.nearest = nearest


class SkipNotAModule(PipelineError):
    code = "skip_not_a_module"

    def __init__(self, gap: frozenset[str], nearest: frozenset[str]):
        super().__init__(
            f"skipped gap {sorted(gap)} is not a module; "
            f"smallest enclosing module is {sorted(nearest)}"
        )
        self.gap = gap
        self.nearest = nearest


class PrimitiveModuleUnsupported(PipelineError):
    """Primitive modules cannot be structured; out of scope by design."""

    code = "primitive_module"

    def __init__(self, descendants: frozenset[str]):
        super().__init__(
            f"primitive module over {sorted(descendants)} cannot be structured"
        )
        self.descendants = descendants


class NoRepetition(PipelineError):
    code = "no_repetition"


class OverlappingVariants(PipelineError):
    code = "overlapping_variants"


class StateExplosion(PipelineError):
    code = "state_explosion"

    def __init__(self, cap: int):
        super().__init__(f"state space exceeds the configured cap of {cap}")
        self.cap = cap


class ExpansionError(PipelineError):
    """A pipeline error raised while expanding one abstract activity."""

    code = "expansion_error"

    def __init__(self, abstract_id: str, cause: PragmosError):
        super().__init__(f"expanding {abstract_id!r} failed: {cause}")
        self.abstract_id = abstract_id
        self.cause = cause
