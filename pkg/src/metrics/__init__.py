"""Statistics, A/B comparison and time decomposition over run logs."""
from vre.errors import VreError

SCHEMA_VERSION = 1


class SchemaMismatch(VreError):
    pass


class UnwritablePath(VreError):
    pass


class UnmatchedRequests(VreError):
    pass


# (attribute, label as printed in the results tables, unit)
ROWS = (
    ("avg_pages_per_sec", "Average pages/s", ""),
    ("avg_requests_per_sec", "Average requests/s", ""),
    ("total_pages", "Total pages", ""),
    ("total_requests", "Total requests", ""),
    ("avg_request_response_time_sec", "Average Request response time", "s"),
    ("total_request_errors", "Total request errors", ""),
    ("error_rate_percent", "Error rate", "%"),
    ("avg_page_response_time_sec", "Average Page response time", "s"),
    ("total_throughput_mb", "Total throughput", "MB"),
    ("avg_throughput_mbps", "Average throughput", "Mb/s"),
    ("users_launched", "Total users launched", ""),
    ("iterations_completed", "Total iterations completed", ""),
    ("action_errors", "Total action errors", ""),
    ("alerts_total_duration_percent", "Alerts total duration", "%"),
)

ROW_LABELS = tuple(label for _, label, _ in ROWS)
