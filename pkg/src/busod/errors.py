"""Exception hierarchy.

Every error carries an exit code for the CLI: 2 for configuration problems,
3 for problems with the input data.
"""

from __future__ import annotations


class PipelineError(Exception):
    exit_code = 3

    def __init__(self, message: str, *, stage: str | None = None) -> None:
        super().__init__(message)
        self.stage = stage

    def __str__(self) -> str:
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


class ConfigError(PipelineError):
    exit_code = 2


class MissingQueueRegion(ConfigError):
    pass


class InputSchemaError(PipelineError):
    pass


class OcrParseError(PipelineError):
    def __init__(self, raw: str) -> None:
        super().__init__(f"cannot parse overlay timestamp {raw!r}")
        self.raw = raw


class TimelineUnresolvable(PipelineError):
    pass


class ClockInconsistency(PipelineError):
    pass


class DegenerateEmbedding(PipelineError):
    pass


class HybridStreamMissing(PipelineError):
    pass


class MetricUnavailable(PipelineError):
    pass
