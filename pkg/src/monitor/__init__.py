from dataclasses import dataclass, field
from typing import Optional

from rich import box
from rich.table import Table
from rich.text import Text

from vre.errors import VreError

HISTORY_SIZE = 3600

BORDER_STYLE = "green"
TICKS_COLOR = "green"
HEADER_STYLE = "green"
TITLE_STYLE = "bold green"


class SamplerUnavailable(VreError):
    pass


@dataclass
class ResourceItem:
    minimum: float = 0.0
    average: float = 0.0
    maximum: float = 0.0

    @classmethod
    def of(cls, values: list) -> "ResourceItem":
        if not values:
            return cls()
        return cls(min(values), sum(values) / len(values), max(values))

    def to_doc(self) -> dict:
        return {"min": round(self.minimum, 2), "avg": round(self.average, 2), "max": round(self.maximum, 2)}


@dataclass(frozen=True)
class ResourceSample:
    t_ms: float
    cpu_percent: float
    mem_percent: float
    process_cpu_percent: Optional[float] = None

    def to_doc(self) -> dict:
        doc = {"tMs": round(self.t_ms, 3), "cpuPercent": self.cpu_percent, "memPercent": self.mem_percent}
        if self.process_cpu_percent is not None:
            doc["processCpuPercent"] = self.process_cpu_percent
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "ResourceSample":
        return cls(doc["tMs"], doc["cpuPercent"], doc["memPercent"], doc.get("processCpuPercent"))


@dataclass
class ResourceStats:
    samples: list = field(default_factory=list)

    @property
    def cpu(self) -> ResourceItem:
        return ResourceItem.of([s.cpu_percent for s in self.samples])

    @property
    def mem(self) -> ResourceItem:
        return ResourceItem.of([s.mem_percent for s in self.samples])

    @property
    def process_cpu(self) -> ResourceItem:
        return ResourceItem.of([s.process_cpu_percent for s in self.samples if s.process_cpu_percent is not None])

    def to_doc(self) -> dict:
        return {
            "summary": {"cpuPercent": self.cpu.to_doc(), "memPercent": self.mem.to_doc(),
                        "processCpuPercent": self.process_cpu.to_doc()},
            "samples": [s.to_doc() for s in self.samples],
        }

    @classmethod
    def from_doc(cls, doc: Optional[dict]) -> Optional["ResourceStats"]:
        if doc is None:
            return None
        return cls([ResourceSample.from_doc(s) for s in doc.get("samples", [])])


def create_kv_grid(title: str, rows: list) -> Table:
    grid = Table.grid(expand=True)

    grid.add_column(Text(title, style=TITLE_STYLE), justify="left", ratio=1)
    grid.add_column("", justify="right", ratio=2)

    for key, value in rows:
        grid.add_row(Text(key, style="bold cyan"), f"{value}")

    return grid


def create_table(title: Optional[str]):
    t = Table(
        title=Text(title, style=TITLE_STYLE),
        title_justify="left",
        show_header=True,
        box=box.SIMPLE,
        expand=False,
        show_lines=False,
        header_style=HEADER_STYLE,
        border_style=BORDER_STYLE
    )
    return t


def create_basic_table() -> Table:
    """Untitled variant of create_table, for tables printed under their own heading."""
    return Table(show_header=True, box=box.SIMPLE, header_style=HEADER_STYLE, border_style=BORDER_STYLE)
