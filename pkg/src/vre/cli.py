import argparse
import asyncio
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import orjson
from rich.console import Console
from rich.markup import escape

from apis import ApiServer, open_configured_store
from loadgen import Mode, ScenarioError
from loadgen.runlog import read_run_log, write_run_log
from loadgen.runner import run_scenario
from loadgen.scenarios import resolve_scenario
from metrics.compare import compare
from metrics.decompose import decompose, parse_access_log
from metrics.report import (load_report, render_comparison, render_decomposition, render_stats, write_artifact,
                            write_comparison_report, write_decomposition_report, write_stats_report)
from metrics.stats import compute_stats
from model import Collection
from monitor import ResourceStats, create_kv_grid, create_table
from monitor.charts import histogram_chart, per_second, run_chart
from shardsim.clusterspec import ClusterSpec, load_cluster_spec
from shardsim.workload import UnshardedOracle, generate_queries, generate_records, load_records, run_queries
from storage.oracle import canonical_dump
from vre import get_version
from vre.config import ServerConfig, load_config, with_port
from vre.errors import VreError
from vre.logs import get_logger, setup_access_log, setup_logging
from vre.seed import SeedProfile, prepare_data_dir, seed_store

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2

console = Console()
err_console = Console(stderr=True)


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _server_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, help="key = value config file")
    parser.add_argument("--db", help="<backend>:<dataDir>, backend document or normalized")
    parser.add_argument("--write-concern", choices=("journaled", "unjournaled"))
    parser.add_argument("--content-root", help="directory or URL prefix uploaded content is served from")
    parser.add_argument("--shell-bytes", type=int, help="total size of the app shell bundle")


def _load_config(args, port: Optional[int] = None) -> ServerConfig:
    overrides = {
        "db": args.db,
        "writeConcern": args.write_concern,
        "VRE_GLOBAL_REPOSITORY": args.content_root,
        "shellBytes": args.shell_bytes,
        "port": port,
    }
    return load_config(args.config, overrides=overrides)


def _parse_args(argv=None) -> argparse.Namespace:
    parser = _ArgumentParser(prog="vre", description="VRE service, load generator and report tooling")
    parser.add_argument("--version", action="version", version=get_version())
    parser.add_argument("--log-level", default="INFO")
    parser.add_argument("--log-file", type=Path)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    p = sub.add_parser("serve", help="run the VRE service")
    _server_flags(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int)
    p.add_argument("--access-log", type=Path)

    p = sub.add_parser("seed", help="populate a data directory with the deterministic fixture")
    _server_flags(p)
    p.add_argument("--force", action="store_true", help="reset a non-empty data directory")
    p.add_argument("--clinicians", type=int, default=10)
    p.add_argument("--patients", type=int, default=150)
    p.add_argument("--contents", type=int, default=150)
    p.add_argument("--seed", type=int, default=2015)

    p = sub.add_parser("loadtest", help="run a scenario and write its run log and report")
    _server_flags(p)
    p.add_argument("scenario", help="preset id (1-5) or scenario file")
    p.add_argument("--mode", help="Refresh or NoRefresh, overrides the scenario")
    p.add_argument("--users", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--loops", type=int)
    p.add_argument("--target", help="URL of an already running service; default spawns one on loopback")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--no-resources", action="store_true", help="skip CPU and memory sampling")
    p.add_argument("--decompose", action="store_true", help="also split request time into client and server")

    p = sub.add_parser("report", help="compute the statistics table of a run log")
    p.add_argument("runlog", type=Path)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--access-log", type=Path, help="service access log, enables time decomposition")
    p.add_argument("--chart", action="store_true", help="print requests/s and resource usage over time")

    p = sub.add_parser("compare", help="A/B comparison of two JSON reports")
    p.add_argument("report_a", type=Path)
    p.add_argument("report_b", type=Path)
    p.add_argument("--name-a")
    p.add_argument("--name-b")
    p.add_argument("--out", type=Path, default=Path("out"))

    p = sub.add_parser("shardsim", help="simulate range sharding behind failover routers")
    p.add_argument("--cluster", type=Path, help="cluster spec file")
    p.add_argument("--records", type=int)
    p.add_argument("--queries", type=int)
    p.add_argument("--kill-router", type=int, action="append", default=[], help="router id to fail mid-run")
    p.add_argument("--add-shard", type=float, action="append", default=[], help="split point to add")
    p.add_argument("--out", type=Path, default=Path("out"))

    p = sub.add_parser("dump", help="write every entity as one JSON line")
    _server_flags(p)
    p.add_argument("--output", type=Path, help="file to write, default stdout")
    p.add_argument("--ordinal-ids", action="store_true", help="replace ids with creation ordinals for diffing")

    return parser.parse_args(argv)


# --- commands ---

async def _serve(args) -> int:
    config = _load_config(args, port=args.port)
    config = replace(config, host=args.host)
    setup_access_log(args.access_log, to_stdout=True)
    server = ApiServer(config)
    await server.start()
    console.print(f"VRE {get_version()} listening on {server.base_url} ({config.backend} backend)")
    try:
        await asyncio.Event().wait()
    finally:
        await server.close()
    return EXIT_OK


def _seed(args) -> int:
    config = _load_config(args)
    prepare_data_dir(config.data_dir / config.backend, force=args.force)
    profile = SeedProfile(clinicians=args.clinicians, patients=args.patients, contents=args.contents, seed=args.seed)
    store = open_configured_store(config)
    try:
        summary = seed_store(store, profile, content_root=config.content_root)
    finally:
        store.close()
    _print_counts(f"Seeded {config.backend} backend in {config.data_dir}", summary.counts)
    return EXIT_OK


def _print_counts(title: str, counts: dict):
    table = create_table(title)
    table.add_column("Collection")
    table.add_column("Records", justify="right")
    for name, count in counts.items():
        table.add_row(name, str(count))
    console.print(table)


def _scenario(args):
    scenario = resolve_scenario(args.scenario)
    changes = {}
    if args.mode:
        changes["mode"] = Mode.parse(args.mode)
    if args.users is not None:
        changes["concurrent_users"] = args.users
    if args.iterations is not None:
        changes["iterations_per_user"] = args.iterations
    if args.loops is not None:
        changes["loops"] = args.loops
    return replace(scenario, **changes) if changes else scenario


async def _loadtest(args) -> int:
    scenario = _scenario(args)
    out = args.out
    access_log = out / "access.log"

    server, store = None, None
    target = args.target
    if target is None:
        config = with_port(_load_config(args), 0)
        store = open_configured_store(config)
        if store.count(Collection.ACCOUNTS) == 0:
            logger.info(f"{config.data_dir / config.backend} is empty, seeding the default fixture")
            seed_store(store, content_root=config.content_root)
        # ordinals in the access log must start from this run
        access_log.unlink(missing_ok=True)
        setup_access_log(access_log, to_stdout=False)
        server = ApiServer(config, store)

    try:
        if server is not None:
            await server.start()
            target = server.base_url
        log = await run_scenario(scenario, target, sample_resources=not args.no_resources,
                                 sample_pid=os.getpid() if server is not None else None)
    finally:
        if server is not None:
            await server.close()
            setup_access_log(None, to_stdout=False)
        if store is not None:
            store.close()

    stem = f"scenario{scenario.id}-{log.meta.backend or 'target'}-{scenario.mode.value}"
    write_run_log(log, out / f"{stem}.runlog.jsonl")
    stats = compute_stats(log)
    paths = write_stats_report(stats, out, stem)
    console.print(render_stats(stats), end="", markup=False, highlight=False)
    console.print(f"run log and report written under {out} ({paths['json'].name})")

    if args.decompose and server is not None:
        _decompose(log, access_log, out, stem)
    return EXIT_OK


def _decompose(log, access_log: Path, out: Path, stem: str):
    try:
        lines = access_log.read_text(encoding="utf-8").splitlines()
    except OSError as ex:
        raise VreError(f"cannot read access log {access_log}: {ex.strerror}")
    table = decompose(log.requests(), parse_access_log(lines))
    write_decomposition_report(table, out, f"{stem}-decomposition")
    console.print(render_decomposition(table), end="", markup=False, highlight=False)


def _report(args) -> int:
    log = read_run_log(args.runlog)
    stats = compute_stats(log)
    stem = args.runlog.name.split(".")[0]
    write_stats_report(stats, args.out, stem)
    console.print(render_stats(stats), end="", markup=False, highlight=False)
    if args.access_log is not None:
        _decompose(log, args.access_log, args.out, stem)
    if args.chart:
        requests = per_second([e.start_ms + e.elapsed_ms for e in log.requests()], log.meta.duration_sec)
        chart = run_chart(requests, ResourceStats.from_doc(log.meta.resources), width=console.width)
        console.print(chart, markup=False, highlight=False)
    return EXIT_OK


def _compare(args) -> int:
    stats_a = load_report(args.report_a)
    stats_b = load_report(args.report_b)
    comparison = compare(stats_a, stats_b, args.name_a, args.name_b)
    write_comparison_report(comparison, args.out)
    console.print(render_comparison(comparison), end="", markup=False, highlight=False)
    return EXIT_OK


async def _shardsim(args) -> int:
    spec = load_cluster_spec(args.cluster) if args.cluster else ClusterSpec()
    if args.records is not None:
        spec = replace(spec, records=args.records)
    if args.queries is not None:
        spec = replace(spec, queries=args.queries)

    cluster = spec.build()
    oracle = UnshardedOracle(spec.collection)
    records = generate_records(spec.records, spec.key_max, spec.seed, spec.field_name)
    queries = generate_queries(spec.queries, spec.key_max, spec.seed, spec.field_name)

    half = len(queries) // 2
    await load_records(cluster, oracle, records)
    first = await run_queries(cluster, oracle, queries[:half])
    for router_id in args.kill_router:
        cluster.fail_router(router_id)
    for point in args.add_shard:
        await cluster.add_shard(int(point) if point.is_integer() else point)
    second = await run_queries(cluster, oracle, queries[half:])

    violations = cluster.partition_violations()
    conserved = cluster.record_count() == oracle.count()
    ok = first.ok and second.ok and not violations and conserved and not cluster.replica_mismatches()

    console.print(create_kv_grid("Shard simulation", [
        ("Shards", ", ".join(f"{sid}: {n}" for sid, n in cluster.shard_counts().items())),
        ("Routing table version", cluster.table.version),
        ("Live routers", f"{len(cluster.live_routers())} of {len(cluster.routers)}"),
        ("Records (sharded / oracle)", f"{cluster.record_count()} / {oracle.count()}"),
        ("Queries", first.queries + second.queries),
        ("Routing errors", len(first.routing_errors) + len(second.routing_errors)),
        ("Result mismatches", len(first.mismatches) + len(second.mismatches)),
        ("Misplaced records", len(violations)),
    ]))
    console.print(histogram_chart(dict(cluster.contacted_histogram), "Shards contacted per query",
                                  width=console.width), markup=False, highlight=False)

    doc = {
        "shards": cluster.shard_counts(),
        "tableVersion": cluster.table.version,
        "records": cluster.record_count(),
        "oracleRecords": oracle.count(),
        "shardsContacted": dict(cluster.contacted_histogram),
        "routingErrors": len(first.routing_errors) + len(second.routing_errors),
        "mismatches": len(first.mismatches) + len(second.mismatches),
        "misplaced": len(violations),
        "ok": ok,
    }
    write_artifact(args.out / "shardsim.json",
                   orjson.dumps(doc, option=orjson.OPT_INDENT_2 | orjson.OPT_NON_STR_KEYS))
    if not ok:
        logger.error("sharded results disagree with the unsharded oracle")
        return EXIT_FAILURE
    return EXIT_OK


def _dump(args) -> int:
    config = _load_config(args)
    store = open_configured_store(config)
    try:
        if args.ordinal_ids:
            lines = [orjson.dumps({"collection": c, **doc}, option=orjson.OPT_SORT_KEYS)
                     for c, docs in canonical_dump(store).items() for doc in docs]
        else:
            lines = [orjson.dumps({"collection": c, **doc}) for c, doc in store.dump()]
    finally:
        store.close()

    data = b"".join(line + b"\n" for line in lines)
    if args.output is None:
        sys.stdout.buffer.write(data)
    else:
        write_artifact(args.output, data)
    return EXIT_OK


async def _main(args) -> int:
    if args.command == "serve":
        return await _serve(args)
    if args.command == "loadtest":
        return await _loadtest(args)
    return await _shardsim(args)


def run(argv=None) -> int:
    args = _parse_args(argv)
    setup_logging(args.log_level, args.log_file)

    try:
        if args.command in ("serve", "loadtest", "shardsim"):
            return asyncio.run(_main(args))
        return {"seed": _seed, "report": _report, "compare": _compare, "dump": _dump}[args.command](args)
    except ScenarioError as ex:
        err_console.print(f"[red]error:[/red] {escape(str(ex))}", highlight=False)
        err_console.print("run `vre loadtest --help` for scenario usage", highlight=False)
        return EXIT_USAGE
    except VreError as ex:
        err_console.print(f"[red]error:[/red] {escape(str(ex))}", highlight=False)
        return EXIT_FAILURE
    except Exception as ex:
        logger.exception(f"{args.command}: unexpected failure")
        err_console.print(f"[red]error:[/red] {type(ex).__name__}: {escape(str(ex))}", highlight=False)
        return EXIT_FAILURE


def main():
    try:
        sys.exit(run())
    except KeyboardInterrupt:
        pass
