from dataclasses import dataclass, field
from typing import Optional

from metrics import ROWS, SCHEMA_VERSION, SchemaMismatch
from metrics.stats import StatsTable


def percent_diff(a: float, b: float) -> Optional[float]:
    """(b - a) / a in percent; None when a is zero and b is not."""
    if a == b:
        return 0.0
    if a == 0:
        return None
    return (b - a) / a * 100


def format_percent(diff: Optional[float]) -> str:
    """Three significant figures below 100%, whole numbers with thousands separators above."""
    if diff is None:
        return "n/a"
    if diff == 0:
        return "+0%"
    if abs(diff) >= 100:
        return f"{diff:+,.0f}%"
    sign = "+" if diff > 0 else "-"
    return f"{sign}{abs(diff):.3g}%"


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    unit: str
    value_a: float
    value_b: float
    percent: Optional[float]

    @property
    def percent_text(self) -> str:
        return format_percent(self.percent)


@dataclass
class ComparisonTable:
    name_a: str
    name_b: str
    rows: list = field(default_factory=list)
    scenario: str = ""
    schema_version: int = SCHEMA_VERSION

    def row(self, label: str) -> ComparisonRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)


def compare(stats_a: StatsTable, stats_b: StatsTable, name_a: Optional[str] = None,
            name_b: Optional[str] = None) -> ComparisonTable:
    if stats_a.schema_version != stats_b.schema_version:
        raise SchemaMismatch(f"cannot compare schema version {stats_a.schema_version} "
                             f"with {stats_b.schema_version}")
    rows = []
    for attr, label, unit in ROWS:
        a, b = getattr(stats_a, attr), getattr(stats_b, attr)
        rows.append(ComparisonRow(label, unit, a, b, percent_diff(a, b)))
    return ComparisonTable(
        name_a=name_a or stats_a.backend or "A",
        name_b=name_b or stats_b.backend or "B",
        rows=rows,
        scenario=stats_a.scenario if stats_a.scenario == stats_b.scenario else "",
        schema_version=stats_a.schema_version,
    )
