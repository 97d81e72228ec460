import bisect
import math
from dataclasses import dataclass
from typing import Optional

from loadgen.runlog import RawRunLog
from metrics import ROWS, SCHEMA_VERSION
from monitor import ResourceStats

BYTES_PER_MB = 1_000_000


@dataclass(frozen=True)
class AlertRules:
    """A tick is in alert when the trailing-window average response time or the host CPU crosses its threshold."""
    response_time_sec: float = 1.5
    window_sec: float = 5.0
    cpu_percent: float = 90.0
    tick_sec: float = 1.0


@dataclass
class StatsTable:
    avg_pages_per_sec: float = 0.0
    avg_requests_per_sec: float = 0.0
    total_pages: int = 0
    total_requests: int = 0
    avg_request_response_time_sec: float = 0.0
    total_request_errors: int = 0
    error_rate_percent: float = 0.0
    avg_page_response_time_sec: float = 0.0
    total_throughput_mb: float = 0.0
    avg_throughput_mbps: float = 0.0
    users_launched: int = 0
    iterations_completed: int = 0
    action_errors: int = 0
    alerts_total_duration_percent: float = 0.0

    duration_sec: float = 0.0
    scenario: str = ""
    backend: str = ""
    mode: str = ""
    # min/avg/max summary as produced by ResourceStats.to_doc()["summary"]
    resources: Optional[dict] = None
    schema_version: int = SCHEMA_VERSION

    def values(self) -> dict:
        """Row label -> value, in table order."""
        return {label: getattr(self, attr) for attr, label, _ in ROWS}


def _rate(total: float, duration_sec: float) -> float:
    return total / duration_sec if duration_sec > 0 else 0.0


def stats_from_totals(duration_sec: float, total_pages: int = 0, total_requests: int = 0,
                      total_request_errors: int = 0, total_throughput_mb: float = 0.0,
                      **others) -> StatsTable:
    """Derives the rate rows from raw totals; every other row is passed through."""
    return StatsTable(
        avg_pages_per_sec=_rate(total_pages, duration_sec),
        avg_requests_per_sec=_rate(total_requests, duration_sec),
        total_pages=total_pages,
        total_requests=total_requests,
        total_request_errors=total_request_errors,
        error_rate_percent=total_request_errors / total_requests * 100 if total_requests else 0.0,
        total_throughput_mb=total_throughput_mb,
        avg_throughput_mbps=_rate(total_throughput_mb * 8, duration_sec),
        duration_sec=duration_sec,
        **others,
    )


def _mean(values: list) -> float:
    return sum(values) / len(values) if values else 0.0


def alerts_duration_percent(requests: list, resources: Optional[ResourceStats], duration_sec: float,
                            rules: AlertRules = AlertRules()) -> float:
    if duration_sec <= 0:
        return 0.0

    done = sorted((e.start_ms + e.elapsed_ms, e.elapsed_ms) for e in requests)
    ends = [end for end, _ in done]
    prefix = [0.0]
    for _, elapsed in done:
        prefix.append(prefix[-1] + elapsed)

    samples = sorted(resources.samples, key=lambda s: s.t_ms) if resources else []
    sample_times = [s.t_ms for s in samples]

    window_ms = rules.window_sec * 1000
    ticks = max(1, math.ceil(duration_sec / rules.tick_sec))
    breached = 0
    for tick in range(ticks):
        t = min((tick + 1) * rules.tick_sec, duration_sec) * 1000

        lo = bisect.bisect_left(ends, t - window_ms)
        hi = bisect.bisect_right(ends, t)
        slow = hi > lo and (prefix[hi] - prefix[lo]) / (hi - lo) > rules.response_time_sec * 1000

        idx = bisect.bisect_right(sample_times, t) - 1
        hot = idx >= 0 and samples[idx].cpu_percent > rules.cpu_percent

        if slow or hot:
            breached += 1
    return breached / ticks * 100


def compute_stats(log: RawRunLog, rules: AlertRules = AlertRules()) -> StatsTable:
    meta = log.meta
    requests = log.requests()
    pages = log.pages()
    resources = ResourceStats.from_doc(meta.resources)
    duration = meta.duration_sec

    return stats_from_totals(
        duration,
        total_pages=len(pages),
        total_requests=len(requests),
        total_request_errors=sum(e.error_flag for e in requests),
        total_throughput_mb=sum(e.bytes_down for e in requests) / BYTES_PER_MB,
        avg_request_response_time_sec=_mean([e.elapsed_ms for e in requests]) / 1000,
        avg_page_response_time_sec=_mean([e.elapsed_ms for e in pages]) / 1000,
        users_launched=meta.users,
        iterations_completed=meta.iterations_completed,
        action_errors=sum(e.error_flag for e in log.actions()),
        alerts_total_duration_percent=alerts_duration_percent(requests, resources, duration, rules),
        scenario=meta.scenario,
        backend=meta.backend,
        mode=meta.mode,
        resources=meta.resources.get("summary") if meta.resources else None,
    )
