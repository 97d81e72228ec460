"""
RawRunLog: run metadata plus one record per event, persisted as orjson lines.

The first line is {"type": "meta", ...}; every following line is
{"type": "event", ...}. Event kinds: "request" (one HTTP exchange), "page" (a
PageLoad and its shell sub-requests, aggregated) and "action" (a script-level
failure such as a failed extraction).
"""
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import orjson

from loadgen import RunLogCorrupt

REQUEST = "request"
PAGE = "page"
ACTION = "action"


@dataclass
class RunEvent:
    user_idx: int
    kind: str
    label: str = ""
    method: str = ""
    path: str = ""
    status: int = 0
    bytes_down: int = 0
    bytes_up: int = 0
    start_ms: float = 0.0
    elapsed_ms: float = 0.0
    ttfb_ms: float = 0.0
    server_ms: Optional[float] = None
    error_flag: int = 0
    page: Optional[int] = None

    _WIRE = {
        "user_idx": "userIdx", "bytes_down": "bytesDown", "bytes_up": "bytesUp", "start_ms": "startMs",
        "elapsed_ms": "elapsedMs", "ttfb_ms": "ttfbMs", "server_ms": "serverMs", "error_flag": "errorFlag",
    }

    def to_doc(self) -> dict:
        return {self._WIRE.get(k, k): v for k, v in asdict(self).items()}

    @classmethod
    def from_doc(cls, doc: dict) -> "RunEvent":
        reverse = {v: k for k, v in cls._WIRE.items()}
        return cls(**{reverse.get(k, k): v for k, v in doc.items() if k != "type"})


@dataclass
class RunMeta:
    scenario: str
    backend: str
    mode: str
    users: int
    iterations: int
    start_wall_ms: float
    end_wall_ms: float
    target: str = ""
    assignments: list = field(default_factory=list)
    iterations_completed: int = 0
    resources: Optional[dict] = None

    @property
    def duration_sec(self) -> float:
        return max(0.0, (self.end_wall_ms - self.start_wall_ms) / 1000)

    def to_doc(self) -> dict:
        return {
            "scenario": self.scenario, "backend": self.backend, "mode": self.mode, "users": self.users,
            "iterations": self.iterations, "startWallMs": self.start_wall_ms, "endWallMs": self.end_wall_ms,
            "target": self.target, "assignments": self.assignments,
            "iterationsCompleted": self.iterations_completed, "resources": self.resources,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RunMeta":
        return cls(
            scenario=doc["scenario"], backend=doc["backend"], mode=doc["mode"], users=doc["users"],
            iterations=doc["iterations"], start_wall_ms=doc["startWallMs"], end_wall_ms=doc["endWallMs"],
            target=doc.get("target", ""), assignments=doc.get("assignments", []),
            iterations_completed=doc.get("iterationsCompleted", 0), resources=doc.get("resources"),
        )


@dataclass
class RawRunLog:
    meta: RunMeta
    events: list = field(default_factory=list)

    def requests(self) -> list:
        return [e for e in self.events if e.kind == REQUEST]

    def pages(self) -> list:
        return [e for e in self.events if e.kind == PAGE]

    def actions(self) -> list:
        return [e for e in self.events if e.kind == ACTION]


def write_run_log(log: RawRunLog, path: Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(orjson.dumps({"type": "meta", **log.meta.to_doc()}) + b"\n")
        for event in log.events:
            fh.write(orjson.dumps({"type": "event", **event.to_doc()}) + b"\n")


def read_run_log(path: Path) -> RawRunLog:
    meta = None
    events = []
    try:
        lines = Path(path).read_bytes().splitlines()
    except OSError as ex:
        raise RunLogCorrupt(f"cannot read {path}: {ex.strerror}")
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            doc = orjson.loads(line)
        except orjson.JSONDecodeError:
            raise RunLogCorrupt(f"{path}:{lineno}: not a run log record")
        if doc.get("type") == "meta":
            meta = RunMeta.from_doc(doc)
        else:
            events.append(RunEvent.from_doc(doc))
    if meta is None:
        raise RunLogCorrupt(f"{path}: run log has no metadata line")
    return RawRunLog(meta, events)
