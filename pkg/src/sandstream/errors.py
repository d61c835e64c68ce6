"""Exception hierarchy shared across the service, codec and transport layers."""


class SandstreamError(Exception):
    """Base class for all package errors."""

    code = "error"


# --- session / control plane ---------------------------------------------


class UnknownScene(SandstreamError):
    code = "unknown_scene"


class CapacityExceeded(SandstreamError):
    code = "capacity_exceeded"


class SessionTerminated(SandstreamError):
    code = "session_terminated"


class HeldByOtherHuman(SandstreamError):
    code = "held_by_other_human"


class NotAgentControlled(SandstreamError):
    code = "not_agent_controlled"


class NotHolder(SandstreamError):
    code = "not_holder"


class ControlRevoked(SandstreamError):
    code = "control_revoked"


class Forbidden(SandstreamError):
    code = "forbidden"


# --- environment -----------------------------------------------------------


class OutOfBounds(SandstreamError):
    code = "out_of_bounds"


class UnknownCommand(SandstreamError):
    code = "unknown_command"


class QuotaExceeded(SandstreamError):
    code = "quota_exceeded"


# --- codec -----------------------------------------------------------------


class DimensionMismatch(SandstreamError):
    code = "dimension_mismatch"


class MissingReference(SandstreamError):
    code = "missing_reference"


class CorruptPayload(SandstreamError):
    code = "corrupt_payload"


# --- transport -------------------------------------------------------------


class PayloadTooLarge(SandstreamError):
    code = "payload_too_large"


class BadMagic(SandstreamError):
    code = "bad_magic"


class BadVersion(SandstreamError):
    code = "bad_version"


class LengthMismatch(SandstreamError):
    code = "length_mismatch"


class ConnectionClosed(SandstreamError):
    code = "connection_closed"


class QueueOverflow(SandstreamError):
    code = "queue_overflow"


# --- netsim / bench --------------------------------------------------------


class UnknownPreset(SandstreamError):
    code = "unknown_preset"


class TooFewFrames(SandstreamError):
    code = "too_few_frames"


class NoClicks(SandstreamError):
    code = "no_clicks"


class BindFailure(SandstreamError):
    code = "bind_failure"
