"""
Splits client-observed request time into the share spent in the service and
the share spent everywhere else, by pairing run-log requests with access-log
lines. Requests pair up by method, path and the ordinal of that method+path
in each log.
"""
import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional

from metrics import UnmatchedRequests
from vre.logs import get_logger

logger = get_logger(__name__)

ACCESS_LINE_RE = re.compile(r"^(?P<method>[A-Z]+) (?P<path>\S+) (?P<status>\d{3}) (?P<ms>[0-9.]+) ms - (?P<bytes>\S+)$")


@dataclass(frozen=True)
class AccessRecord:
    method: str
    path: str
    status: int
    elapsed_ms: float


@dataclass(frozen=True)
class TimeDecomposition:
    label: str
    method: str
    path: str
    total_ms: float
    server_ms: float
    client_ms: float
    ttfb_ms: float


@dataclass(frozen=True)
class OperationTimes:
    label: str
    count: int
    total_ms: float
    client_ms: float
    server_ms: float
    ttfb_ms: float


@dataclass
class DecompositionTable:
    operations: list = field(default_factory=list)
    matched: list = field(default_factory=list)
    # (method, path, ordinal) of client requests with no access-log line
    unmatched: list = field(default_factory=list)
    # pairs whose server time exceeded the client time, clamped to it
    crossed: int = 0

    def operation(self, label: str) -> OperationTimes:
        for op in self.operations:
            if op.label == label:
                return op
        raise KeyError(label)


def parse_access_log(lines: Iterable[str]) -> list:
    """Lines of any other shape (startup messages, blank lines) are skipped."""
    records = []
    for line in lines:
        match = ACCESS_LINE_RE.match(line.strip())
        if match:
            records.append(AccessRecord(match["method"], match["path"], int(match["status"]), float(match["ms"])))
    return records


def split_time(total_ms: float, server_ms: float) -> float:
    return max(0.0, round(total_ms - server_ms, 3))


def _ordinal_keys(items, key):
    seen = defaultdict(int)
    for item in items:
        k = key(item)
        yield (*k, seen[k]), item
        seen[k] += 1


def _mean(values: list) -> float:
    return round(sum(values) / len(values), 3) if values else 0.0


def decompose(client_requests: list, access_records: list, strict: bool = False,
              labels: Optional[set] = None) -> DecompositionTable:
    """
    client_requests are run-log request events in issue order; access_records
    are in log order. With strict, any client request lacking a server line
    raises UnmatchedRequests instead of being listed.
    """
    server = dict(_ordinal_keys(access_records, lambda r: (r.method, r.path)))
    ordered = sorted(client_requests, key=lambda e: e.start_ms)

    table = DecompositionTable()
    by_label = defaultdict(list)
    for key, event in _ordinal_keys(ordered, lambda e: (e.method, e.path)):
        record = server.get(key)
        if record is None:
            table.unmatched.append(key)
            continue
        total_ms = round(event.elapsed_ms, 3)
        server_ms = record.elapsed_ms
        if server_ms > total_ms:
            # concurrent requests on one path can finish out of issue order
            table.crossed += 1
            server_ms = total_ms
        row = TimeDecomposition(
            label=event.label, method=event.method, path=event.path,
            total_ms=total_ms, server_ms=server_ms,
            client_ms=split_time(total_ms, server_ms), ttfb_ms=round(event.ttfb_ms, 3),
        )
        table.matched.append(row)
        if labels is None or row.label in labels:
            by_label[row.label].append(row)

    if strict and table.unmatched:
        raise UnmatchedRequests(f"{len(table.unmatched)} request(s) have no access-log line, "
                                f"first: {' '.join(map(str, table.unmatched[0]))}")

    if table.crossed:
        logger.warning(f"decomposition: {table.crossed} request pair(s) crossed under concurrency, "
                       f"their server time was clamped to the client time")

    for label, rows in by_label.items():
        table.operations.append(OperationTimes(
            label=label, count=len(rows),
            total_ms=_mean([r.total_ms for r in rows]),
            client_ms=_mean([r.client_ms for r in rows]),
            server_ms=_mean([r.server_ms for r in rows]),
            ttfb_ms=_mean([r.ttfb_ms for r in rows]),
        ))
    return table
