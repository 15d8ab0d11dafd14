"""Exception types shared across the toolkit."""


class PromptInspectError(Exception):
    """Base class for all toolkit errors."""


# --- prompt template / composition ---------------------------------------

class EmptyMandatorySectionError(PromptInspectError):
    """Task or Output section is empty in a template that must be runnable."""


class MissingReferenceError(PromptInspectError):
    """The shot mode demands reference samples the template does not hold."""


class OverrideRequiredError(PromptInspectError):
    """A refinement touches a protected section without the override flag."""


# --- detector client -------------------------------------------------------

class TransportError(PromptInspectError):
    """Network or HTTP failure that survived the retry budget."""


class ProviderError(PromptInspectError):
    """Non-2xx response carrying a provider error message."""


class CacheMissError(PromptInspectError):
    """Replay mode was asked for a request fingerprint not in the cache."""


class MalformedOutputError(PromptInspectError):
    """Model response does not contain a valid verdict object."""


# --- refinement loop -------------------------------------------------------

class NotApprovedError(PromptInspectError):
    """apply() was called with a proposal that is not in the Approved state."""


class IllegalTransitionError(PromptInspectError):
    """Proposal state transitions are one-way; this one went backwards."""


# --- features / curves -----------------------------------------------------

class IndexRangeError(PromptInspectError):
    """Window indices fall outside the curve or are not strictly ordered."""


class CurveLengthError(PromptInspectError):
    """A force curve does not have the expected number of points."""


# --- isolation forest ------------------------------------------------------

class DimensionMismatchError(PromptInspectError):
    """Query vector dimension differs from the training data."""


# --- evaluation harness ----------------------------------------------------

class InsufficientNormalsError(PromptInspectError):
    """Ramp-up asked for more normal training samples than are available."""


class DegenerateSplitError(PromptInspectError):
    """A validation/holdout split lacks one of the label classes."""


# --- dataset loading -------------------------------------------------------

class LayoutError(PromptInspectError):
    """On-disk dataset directory tree does not match the expected layout."""


class FormatError(PromptInspectError):
    """A curve CSV row is malformed (wrong point count or non-numeric)."""


class EmptyPoolError(PromptInspectError):
    """A reference was requested from an empty reference pool."""
