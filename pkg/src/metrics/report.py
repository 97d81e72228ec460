"""
Report artifacts: a plain-text table laid out like the published results
tables, a CSV whose header row is the row labels, and a JSON document that
`load_report` reads back for comparisons.
"""
import csv
import io
from pathlib import Path

import orjson
from rich.console import Console

from metrics import ROW_LABELS, ROWS, SCHEMA_VERSION, SchemaMismatch, UnwritablePath
from metrics.compare import ComparisonTable
from metrics.decompose import DecompositionTable
from metrics.stats import StatsTable
from monitor import create_basic_table, create_table
from vre.logs import get_logger

logger = get_logger(__name__)

RENDER_WIDTH = 100

_RATES = {"avg_pages_per_sec", "avg_requests_per_sec"}
_COUNTS = {"total_pages", "total_requests", "total_request_errors", "users_launched", "iterations_completed",
           "action_errors"}


def _trim(text: str) -> str:
    return text.rstrip("0").rstrip(".") if "." in text else text


def _sig3(value: float) -> str:
    if value >= 100:
        return f"{value:.0f}"
    return f"{value:.3g}"


def format_value(attr: str, unit: str, value) -> str:
    if attr in _COUNTS:
        return str(int(value))
    if attr in _RATES:
        return f"{value:.1f}"
    if unit == "s":
        return f"{_sig3(value)} s"
    if unit in ("MB", "Mb/s"):
        return f"{value:.2f} {unit}"
    if unit == "%":
        return f"{_trim(f'{value:.1f}')} %"
    return str(value)


def _to_text(*renderables) -> str:
    console = Console(file=io.StringIO(), width=RENDER_WIDTH, color_system=None, force_terminal=False)
    for r in renderables:
        console.print(r)
    return console.file.getvalue()


def _stats_title(stats: StatsTable) -> str:
    parts = [f"Scenario {stats.scenario}" if stats.scenario else "Run"]
    if stats.backend:
        parts.append(stats.backend)
    if stats.mode:
        parts.append(stats.mode)
    return f"{' / '.join(parts)} ({stats.duration_sec:.0f} s)"


def _resources_table(resources: dict):
    table = create_table("Resources")
    table.add_column("Resource")
    for col in ("Min", "Avg", "Max"):
        table.add_column(col, justify="right")
    names = {"cpuPercent": "Host CPU %", "memPercent": "Host memory %", "processCpuPercent": "Service CPU %"}
    for key, name in names.items():
        item = resources.get(key)
        if item:
            table.add_row(name, f"{item['min']:.1f}", f"{item['avg']:.1f}", f"{item['max']:.1f}")
    return table


def render_stats(stats: StatsTable) -> str:
    table = create_table(_stats_title(stats))
    table.add_column("Statistic")
    table.add_column("Value", justify="right")
    for attr, label, unit in ROWS:
        table.add_row(label, format_value(attr, unit, getattr(stats, attr)))
    if stats.resources:
        return _to_text(table, _resources_table(stats.resources))
    return _to_text(table)


def render_comparison(comparison: ComparisonTable) -> str:
    title = f"Scenario {comparison.scenario}" if comparison.scenario else "Comparison"
    table = create_table(title)
    table.add_column("Statistic")
    table.add_column(comparison.name_a, justify="right")
    table.add_column(comparison.name_b, justify="right")
    table.add_column("%", justify="right")
    attrs = {label: attr for attr, label, _ in ROWS}
    for row in comparison.rows:
        attr = attrs[row.label]
        table.add_row(row.label, format_value(attr, row.unit, row.value_a),
                      format_value(attr, row.unit, row.value_b), row.percent_text)
    return _to_text(table)


def render_decomposition(decomposition: DecompositionTable) -> str:
    table = create_basic_table()
    table.add_column("Operation")
    for col in ("Total time (ms)", "Client time (ms)", "Server time (ms)", "Count"):
        table.add_column(col, justify="right")
    for op in decomposition.operations:
        table.add_row(op.label, f"{op.total_ms:.3f}", f"{op.client_ms:.3f}", f"{op.server_ms:.3f}", str(op.count))
    text = _to_text(table)
    if decomposition.unmatched:
        text += f"{len(decomposition.unmatched)} request(s) without an access-log line were left out\n"
    return text


# --- structured documents ---

def stats_to_doc(stats: StatsTable) -> dict:
    return {
        "schemaVersion": stats.schema_version,
        "kind": "stats",
        "scenario": stats.scenario,
        "backend": stats.backend,
        "mode": stats.mode,
        "durationSec": stats.duration_sec,
        "rows": stats.values(),
        "resources": stats.resources,
    }


def stats_from_doc(doc: dict, source: str = "<doc>") -> StatsTable:
    version = doc.get("schemaVersion")
    if version != SCHEMA_VERSION:
        raise SchemaMismatch(f"{source}: schema version {version!r}, expected {SCHEMA_VERSION}")
    if doc.get("kind") != "stats":
        raise SchemaMismatch(f"{source}: not a statistics report")
    rows = doc.get("rows") or {}
    missing = [label for label in ROW_LABELS if label not in rows]
    if missing:
        raise SchemaMismatch(f"{source}: missing row(s) {', '.join(missing)}")

    values = {}
    for attr, label, _ in ROWS:
        value = rows[label]
        values[attr] = int(value) if attr in _COUNTS else float(value)
    return StatsTable(
        **values,
        duration_sec=float(doc.get("durationSec", 0.0)),
        scenario=str(doc.get("scenario", "")),
        backend=str(doc.get("backend", "")),
        mode=str(doc.get("mode", "")),
        resources=doc.get("resources"),
        schema_version=version,
    )


def comparison_to_doc(comparison: ComparisonTable) -> dict:
    return {
        "schemaVersion": comparison.schema_version,
        "kind": "comparison",
        "scenario": comparison.scenario,
        "a": comparison.name_a,
        "b": comparison.name_b,
        "rows": [{"label": r.label, "a": r.value_a, "b": r.value_b, "percent": r.percent,
                  "percentText": r.percent_text} for r in comparison.rows],
    }


def decomposition_to_doc(decomposition: DecompositionTable) -> dict:
    return {
        "schemaVersion": SCHEMA_VERSION,
        "kind": "decomposition",
        "operations": [{"label": op.label, "count": op.count, "totalMs": op.total_ms, "clientMs": op.client_ms,
                        "serverMs": op.server_ms, "ttfbMs": op.ttfb_ms} for op in decomposition.operations],
        "unmatched": [list(key) for key in decomposition.unmatched],
    }


def load_report(path: Path) -> StatsTable:
    try:
        doc = orjson.loads(Path(path).read_bytes())
    except OSError as ex:
        raise SchemaMismatch(f"cannot read {path}: {ex.strerror}")
    except orjson.JSONDecodeError:
        raise SchemaMismatch(f"{path}: not a JSON report")
    if not isinstance(doc, dict):
        raise SchemaMismatch(f"{path}: not a JSON report")
    return stats_from_doc(doc, source=str(path))


# --- csv ---

def _cell(value) -> str:
    return str(value) if value is not None else ""


def stats_to_csv(stats: StatsTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ROW_LABELS)
    writer.writerow([_cell(v) for v in stats.values().values()])
    return out.getvalue()


def comparison_to_csv(comparison: ComparisonTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["Statistic", comparison.name_a, comparison.name_b, "%"])
    for row in comparison.rows:
        writer.writerow([row.label, _cell(row.value_a), _cell(row.value_b), row.percent_text])
    return out.getvalue()


def decomposition_to_csv(decomposition: DecompositionTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["Operation", "Total time (ms)", "Client time (ms)", "Server time (ms)", "Count"])
    for op in decomposition.operations:
        writer.writerow([op.label, op.total_ms, op.client_ms, op.server_ms, op.count])
    return out.getvalue()


# --- files ---

def write_artifact(path: Path, data: bytes):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as ex:
        raise UnwritablePath(f"cannot write {path}: {ex.strerror}")
    logger.debug(f"wrote {path}")


def _write_all(out_dir: Path, stem: str, text: str, csv_text: str, doc: dict) -> dict:
    out_dir = Path(out_dir)
    paths = {"txt": out_dir / f"{stem}.txt", "csv": out_dir / f"{stem}.csv", "json": out_dir / f"{stem}.json"}
    write_artifact(paths["txt"], text.encode("utf-8"))
    write_artifact(paths["csv"], csv_text.encode("utf-8"))
    write_artifact(paths["json"], orjson.dumps(doc, option=orjson.OPT_INDENT_2))
    return paths


def write_stats_report(stats: StatsTable, out_dir: Path, stem: str = "stats") -> dict:
    return _write_all(out_dir, stem, render_stats(stats), stats_to_csv(stats), stats_to_doc(stats))


def write_comparison_report(comparison: ComparisonTable, out_dir: Path, stem: str = "comparison") -> dict:
    return _write_all(out_dir, stem, render_comparison(comparison), comparison_to_csv(comparison),
                      comparison_to_doc(comparison))


def write_decomposition_report(decomposition: DecompositionTable, out_dir: Path,
                               stem: str = "decomposition") -> dict:
    return _write_all(out_dir, stem, render_decomposition(decomposition), decomposition_to_csv(decomposition),
                      decomposition_to_doc(decomposition))
