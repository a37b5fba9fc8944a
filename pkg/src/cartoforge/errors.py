"""Exception types shared across the pipeline."""

from __future__ import annotations


class CartoforgeError(Exception):
    """Base class for all pipeline errors."""


# --- stylesheet / verdict parsing ------------------------------------------

class MalformedJson(CartoforgeError):
    pass


class SchemaViolation(CartoforgeError):
    pass


class MissingBackground(SchemaViolation):
    pass


class UnknownElement(CartoforgeError):
    pass


class IllegalVariableForCategory(CartoforgeError):
    pass


# --- prompt kit -------------------------------------------------------------

class MissingPlaceholder(CartoforgeError):
    pass


class NoJsonFound(CartoforgeError):
    pass


class EmptyReply(CartoforgeError):
    pass


# --- provider gateway -------------------------------------------------------

class ProviderError(CartoforgeError):
    pass


class ProviderTimeout(ProviderError):
    pass


class ProviderHttpError(ProviderError):
    def __init__(self, status: int, body: str):
        super().__init__(f"provider returned HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class ReplayMiss(ProviderError):
    """A replayed call was not found in the fixture; the run must abort."""

    def __init__(self, key: str):
        super().__init__(f"no fixture record for {key}")
        self.key = key


# --- compiler ---------------------------------------------------------------

class IncompleteSheet(CartoforgeError):
    pass


class SourceBindingMissing(CartoforgeError):
    pass


class UndecodableImage(CartoforgeError):
    pass


class SlugCollision(CartoforgeError):
    pass


class ImplementerOutputRejected(CartoforgeError):
    """An MLLM-produced style document failed validation or value fidelity."""


# --- renderer ---------------------------------------------------------------

class MissingIcon(CartoforgeError):
    pass


class EmptyViewport(CartoforgeError):
    pass


class AdapterNotFound(CartoforgeError):
    pass


class AdapterFailed(CartoforgeError):
    def __init__(self, exit_code: int, stderr: str):
        super().__init__(f"render adapter exited {exit_code}: {stderr[:200]}")
        self.exit_code = exit_code
        self.stderr = stderr


class BadOutputSize(CartoforgeError):
    pass


# --- metrics ----------------------------------------------------------------

class EmptyImage(CartoforgeError):
    pass


class BinMismatch(CartoforgeError):
    pass


class ZeroHistogram(CartoforgeError):
    pass


# --- orchestrator / session store -------------------------------------------

class InvalidStylesheet(CartoforgeError):
    pass


class SessionTerminated(CartoforgeError):
    pass


class AwaitingHumanVerdict(CartoforgeError):
    pass


class CorruptSession(CartoforgeError):
    pass
