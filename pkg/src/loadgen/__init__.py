"""Virtual users, populations and scenarios replayed against a running VRE service."""
from enum import Enum

from vre.errors import VreError


class TargetUnreachable(VreError):
    pass


class SeedMissing(VreError):
    pass


class ScenarioError(VreError):
    pass


class RunLogCorrupt(VreError):
    pass


class Mode(str, Enum):
    REFRESH = "Refresh"
    NO_REFRESH = "NoRefresh"

    @classmethod
    def parse(cls, value: str) -> "Mode":
        lowered = value.strip().lower().replace("-", "").replace("_", "")
        for mode in cls:
            if mode.value.lower() == lowered:
                return mode
        raise ScenarioError(f"mode must be Refresh or NoRefresh, got {value!r}")
