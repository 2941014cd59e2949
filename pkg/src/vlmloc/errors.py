"""Exception hierarchy shared across the package.

Answer-parsing failures are split into distinct classes because the retry
policy and the tests need to tell them apart.
"""


class VlmlocError(Exception):
    """Base class for all package errors."""


class ConfigError(VlmlocError):
    """Invalid configuration, arguments, or request payloads."""


class FrameIOError(VlmlocError):
    """Frame directory or image file problems."""


class TimelineError(VlmlocError):
    """Malformed or inconsistent annotation data."""


class ComposeError(VlmlocError):
    """Prompt image composition failed."""


class AnswerParseError(VlmlocError):
    """Base class for failures while parsing a model reply."""


class NoJsonFound(AnswerParseError):
    """The reply contains no well-formed JSON object with a "points" key."""


class PointsNotInteger(AnswerParseError):
    """The "points" payload is not a list of integers."""


class PointsOutOfRange(AnswerParseError):
    """The selected index falls outside the badge range shown."""


class EmptyPointsNotAllowed(AnswerParseError):
    """An empty "points" list was returned where absence is not permitted."""


class BackendError(VlmlocError):
    """Transport-level failure or exhausted retries with fallback disabled."""


class OracleError(VlmlocError):
    """The simulated backend cannot answer from its ground truth."""


class EvalError(VlmlocError):
    """Evaluation inputs are incompatible or degenerate."""
