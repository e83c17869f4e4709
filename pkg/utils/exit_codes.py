"""Exit codes shared by every irvo subcommand."""

from enum import IntEnum


class ExitCode(IntEnum):
    SUCCESS = 0  # no Error findings
    FINDINGS = 1  # at least one Error finding, or a failed merge
    INPUT_ERROR = 2  # unreadable file, parse diagnostics, bad usage

    @property
    def description(self) -> str:
        return {
            ExitCode.SUCCESS: "No Error findings",
            ExitCode.FINDINGS: "Error findings reported",
            ExitCode.INPUT_ERROR: "Input could not be read or parsed",
        }[self]

    @classmethod
    def worst(cls, codes) -> "ExitCode":
        return max((cls(code) for code in codes), default=cls.SUCCESS)
