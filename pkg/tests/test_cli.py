import orjson
import pytest

from loadgen.runlog import ACTION, PAGE, REQUEST, RawRunLog, RunEvent, RunMeta, write_run_log
from monitor import ResourceSample, ResourceStats
from monitor.charts import histogram_chart, per_second, run_chart
from vre import cli
from vre.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, run


def test_compare_fixture_reports(fixtures_dir, tmp_path):
    code = run(["compare", str(fixtures_dir / "scenario1_normalized.json"),
                str(fixtures_dir / "scenario1_document.json"), "--name-a", "A", "--name-b", "B",
                "--out", str(tmp_path)])
    assert code == EXIT_OK
    text = (tmp_path / "comparison.txt").read_text()
    assert "+42.1%" in text
    assert "+2,568%" in text
    doc = orjson.loads((tmp_path / "comparison.json").read_bytes())
    assert doc["kind"] == "comparison"


def test_compare_schema_mismatch(fixtures_dir, tmp_path):
    other = tmp_path / "old.json"
    doc = orjson.loads((fixtures_dir / "scenario1_document.json").read_bytes())
    other.write_bytes(orjson.dumps({**doc, "schemaVersion": 99}))
    code = run(["compare", str(fixtures_dir / "scenario1_normalized.json"), str(other), "--out", str(tmp_path)])
    assert code == EXIT_FAILURE
    assert not (tmp_path / "comparison.txt").exists()


def test_unknown_scenario(tmp_path):
    assert run(["loadtest", "9", "--out", str(tmp_path)]) == EXIT_USAGE


def test_bad_arguments():
    with pytest.raises(SystemExit) as info:
        run(["loadtest"])
    assert info.value.code == EXIT_USAGE


def test_shardsim_with_split_and_dead_router(tmp_path):
    code = run(["shardsim", "--records", "600", "--queries", "30", "--add-shard", "7500", "--kill-router", "1",
                "--out", str(tmp_path)])
    assert code == EXIT_OK
    doc = orjson.loads((tmp_path / "shardsim.json").read_bytes())
    assert doc["ok"]
    assert doc["tableVersion"] == 2
    assert doc["records"] == doc["oracleRecords"] == 600
    assert len(doc["shards"]) == 4


def test_shardsim_bad_cluster_file(tmp_path):
    path = tmp_path / "cluster.conf"
    path.write_text("routers = 0\n")
    assert run(["shardsim", "--cluster", str(path), "--out", str(tmp_path)]) == EXIT_FAILURE


def test_seed_then_dump(tmp_path):
    db = f"document:{tmp_path / 'data'}"
    assert run(["seed", "--db", db, "--clinicians", "2", "--patients", "3", "--contents", "3"]) == EXIT_OK
    # a second seed into the same directory needs --force
    assert run(["seed", "--db", db, "--clinicians", "2", "--patients", "3", "--contents", "3"]) == EXIT_FAILURE

    output = tmp_path / "dump.jsonl"
    assert run(["dump", "--db", db, "--output", str(output), "--ordinal-ids"]) == EXIT_OK
    lines = [orjson.loads(line) for line in output.read_bytes().splitlines()]
    collections = [line["collection"] for line in lines]
    assert collections.count("Clinicians") == 2
    assert collections.count("Patients") == 3
    assert collections.count("Contents") == 3
    assert all(line["_id"].startswith("#") for line in lines)


def test_loadtest_on_seeded_store(tmp_path):
    db = f"document:{tmp_path / 'data'}"
    assert run(["seed", "--db", db, "--clinicians", "2", "--patients", "3", "--contents", "3"]) == EXIT_OK
    out = tmp_path / "out"
    code = run(["loadtest", "1", "--db", db, "--users", "2", "--loops", "3", "--shell-bytes", "20000",
                "--no-resources", "--decompose", "--out", str(out)])
    assert code == EXIT_OK

    stem = "scenario1-document-Refresh"
    for suffix in (".runlog.jsonl", ".txt", ".csv", ".json", "-decomposition.json"):
        assert (out / f"{stem}{suffix}").exists(), suffix
    doc = orjson.loads((out / f"{stem}.json").read_bytes())
    assert doc["kind"] == "stats"
    assert doc["scenario"] == "1"
    assert (out / "access.log").read_text().strip()


def test_unexpected_errors_exit_with_failure(monkeypatch, fixtures_dir, tmp_path):
    def broken(args):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli, "_compare", broken)
    code = run(["compare", str(fixtures_dir / "scenario1_normalized.json"),
                str(fixtures_dir / "scenario1_document.json"), "--out", str(tmp_path)])
    assert code == EXIT_FAILURE


def test_report_from_run_log(tmp_path):
    log = RawRunLog(
        RunMeta("2", "normalized", "Refresh", 1, 1, 0.0, 2000.0, assignments=["View100"]),
        [RunEvent(0, PAGE, "App shell", "GET", "/app/index.html", 200, 4000, 500, 0.0, 20.0, page=0),
         RunEvent(0, REQUEST, "View Patients", "GET", "/api/patient", 200, 900, 120, 30.0, 5.0, 4.0, 3.0),
         RunEvent(0, ACTION, "iteration", error_flag=0)],
    )
    path = tmp_path / "scenario2.runlog.jsonl"
    write_run_log(log, path)
    assert run(["report", str(path), "--out", str(tmp_path / "out"), "--chart"]) == EXIT_OK
    doc = orjson.loads((tmp_path / "out" / "scenario2.json").read_bytes())
    assert doc["kind"] == "stats"
    assert doc["scenario"] == "2"
    assert (tmp_path / "out" / "scenario2.csv").exists()


def test_report_on_corrupt_log(tmp_path):
    path = tmp_path / "broken.runlog.jsonl"
    path.write_text("not json\n")
    assert run(["report", str(path), "--out", str(tmp_path)]) == EXIT_FAILURE


class TestCharts:
    def test_per_second(self):
        assert per_second([10, 999, 1000, 2500], 3.0) == [2, 1, 1]
        assert per_second([], 0) == [0]

    def test_run_chart_renders(self):
        resources = ResourceStats([ResourceSample(0, 10.0, 40.0), ResourceSample(1000, 30.0, 41.0)])
        assert isinstance(run_chart([3, 5, 2], resources, width=90), str)

    def test_histogram_renders(self):
        chart = histogram_chart({1: 20, 3: 10}, "Shards contacted per query")
        assert "Shards contacted per query" in chart
