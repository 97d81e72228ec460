import asyncio
import time
from collections import Counter
from dataclasses import replace

import pytest

from apis import ApiServer
from loadgen import Mode, RunLogCorrupt, ScenarioError, SeedMissing, TargetUnreachable
from loadgen.runlog import ACTION, PAGE, REQUEST, RawRunLog, RunEvent, RunMeta, read_run_log, write_run_log
from loadgen.runner import VirtualUser, probe, run_scenario, server_ms
from loadgen.scenarios import Population, Scenario, parse_population, parse_scenario, preset, resolve_scenario
from loadgen.scripts import Login, PageLoad, _walk, add100, builtin_script, count_mutations, refresh_mode, view100
from metrics.decompose import decompose, parse_access_log
from metrics.stats import compute_stats
from model import Collection
from storage.document import DocumentStore
from vre.logs import setup_access_log
from vre.seed import SeedProfile, seed_store

from conftest import FAST_HASH


class TestPopulation:
    def test_scenario3_binds_nine_viewers_and_one_goal_setter(self):
        assignment = preset("3").population.assign(10)
        assert assignment.count("View100") == 9
        assert assignment.count("Goal100") == 1

    def test_largest_remainder(self):
        population = Population((("View100", 50), ("Goal100", 50)))
        assert population.assign(3) == ["View100", "View100", "Goal100"]
        assert population.assign(0) == []

    def test_weights_must_sum_to_100(self):
        with pytest.raises(ScenarioError):
            Population((("View100", 80),))

    def test_unknown_script(self):
        with pytest.raises(ScenarioError):
            Population.single("Delete100")

    def test_parse_population(self):
        assert parse_population("View100:90, Goal100:10").mix == (("View100", 90.0), ("Goal100", 10.0))
        assert parse_population("Add100").mix == (("Add100", 100.0),)


class TestScenarioFiles:
    def test_parse(self):
        scenario = parse_scenario("name = Refresh experiment\nscript = UpdateRep100\nusers = 4\n"
                                  "mode = norefresh\nloops = 5\n", source="refresh.scenario")
        assert scenario.id == "refresh"
        assert scenario.mode is Mode.NO_REFRESH
        assert scenario.concurrent_users == 4
        assert all(s.name == "UpdateRep100" for s in scenario.scripts())

    @pytest.mark.parametrize("text", [
        "users = 4",
        "script = Add100\npopulation = Add100",
        "script = Add100\nusers = many",
        "script = Add100\ncolour = red",
        "script = Add100\nmode = sometimes",
    ])
    def test_bad_files(self, text):
        with pytest.raises(ScenarioError):
            parse_scenario(text)

    def test_resolve(self, tmp_path):
        path = tmp_path / "mine.scenario"
        path.write_text("script = Goal100\nusers = 2\n")
        assert resolve_scenario("1").name == "Add clinicians"
        assert resolve_scenario(str(path)).concurrent_users == 2
        with pytest.raises(ScenarioError):
            resolve_scenario("9")


class TestScripts:
    def test_add100_mutates_once_per_loop(self):
        assert count_mutations(add100()) == 100
        assert count_mutations(add100(7)) == 7

    def test_refresh_adds_a_page_after_each_mutation(self):
        script = refresh_mode(add100(3), Mode.REFRESH)
        pages = [a for a in _walk(script.actions) if isinstance(a, PageLoad)]
        # the opening shell load plus one refresh inside the loop body
        assert len(pages) == 2

    def test_refresh_after_navigating_reads(self):
        script = refresh_mode(view100(3), Mode.REFRESH)
        assert any(isinstance(a, PageLoad) and a.label == "Refresh" for a in _walk(script.actions))

    def test_no_refresh_leaves_script_alone(self):
        script = add100(3)
        assert refresh_mode(script, Mode.NO_REFRESH) is script

    def test_unknown_builtin(self):
        with pytest.raises(ScenarioError):
            builtin_script("Nope")

    def test_server_timing_parse(self):
        assert server_ms("store;dur=00001.500, app;dur=00012.250") == 12.25
        assert server_ms(None) is None


class TestRunLog:
    def test_round_trip(self, tmp_path):
        log = RawRunLog(
            RunMeta("1", "document", "Refresh", 1, 1, 1000.0, 3000.0, assignments=["Add100"]),
            [RunEvent(0, REQUEST, "Login", "POST", "/api/auth/login", 200, 300, 120, 1.0, 4.5, 4.0, 3.2),
             RunEvent(0, PAGE, "App shell", "GET", "/app/index.html", 200, 9000, 800, 6.0, 10.0, page=0),
             RunEvent(0, ACTION, "extract failed", error_flag=1)],
        )
        path = tmp_path / "run.jsonl"
        write_run_log(log, path)
        back = read_run_log(path)
        assert back.meta.duration_sec == 2.0
        assert back.events == log.events
        assert len(back.requests()) == len(back.pages()) == len(back.actions()) == 1

    def test_corrupt(self, tmp_path):
        path = tmp_path / "run.jsonl"
        path.write_bytes(b'{"type": "event", "userIdx": 0, "kind": "request"}\n')
        with pytest.raises(RunLogCorrupt):
            read_run_log(path)
        path.write_bytes(b"not json\n")
        with pytest.raises(RunLogCorrupt):
            read_run_log(path)
        with pytest.raises(RunLogCorrupt):
            read_run_log(tmp_path / "absent.jsonl")


class TestRunner:
    async def test_probe(self, live_server):
        status = await probe(live_server.base_url)
        assert status["counts"]["Patients"] == 20

    async def test_unreachable_target(self):
        with pytest.raises(TargetUnreachable):
            await probe("http://127.0.0.1:1")

    async def test_missing_seed(self, live_server):
        scenario = replace(preset("3"), concurrent_users=2, loops=50)
        with pytest.raises(SeedMissing):
            await run_scenario(scenario, live_server.base_url, sample_resources=False)

    async def test_scenario1_adds_exactly_a_thousand_clinicians(self, live_server, seeded_store):
        before = seeded_store.count(Collection.CLINICIANS)
        log = await run_scenario(preset("1"), live_server.base_url, sample_resources=False)
        assert seeded_store.count(Collection.CLINICIANS) - before == 1000
        stats = compute_stats(log)
        assert stats.total_request_errors == 0
        assert stats.users_launched == 10
        assert stats.iterations_completed == 10
        assert stats.action_errors == 0

    async def test_scenario3_assignment_is_recorded(self, live_server):
        scenario = replace(preset("3"), loops=5)
        log = await run_scenario(scenario, live_server.base_url, sample_resources=False)
        assert log.meta.assignments.count("View100") == 9
        assert log.meta.assignments.count("Goal100") == 1
        assert compute_stats(log).total_request_errors == 0

    async def test_repeated_runs_issue_the_same_requests(self, live_server):
        scenario = replace(preset("2"), concurrent_users=3, loops=4)
        counts = []
        for _ in range(2):
            log = await run_scenario(scenario, live_server.base_url, sample_resources=False)
            assert compute_stats(log).total_request_errors == 0
            counts.append(Counter((e.user_idx, e.label, e.method) for e in log.requests()))
        assert counts[0] == counts[1]
        assert sum(counts[0].values()) >= 3 * 4

    async def test_users_run_concurrently(self, live_server):
        scenario = replace(preset("2"), concurrent_users=4, loops=5)
        log = await run_scenario(scenario, live_server.base_url, sample_resources=False)
        spans = {}
        for event in log.requests():
            first, last = spans.get(event.user_idx, (event.start_ms, 0.0))
            spans[event.user_idx] = (min(first, event.start_ms), max(last, event.start_ms + event.elapsed_ms))
        assert len(spans) == 4
        # every user had started before any user finished
        assert max(first for first, _ in spans.values()) < min(last for _, last in spans.values())

    async def test_resources_are_sampled(self, live_server):
        scenario = replace(preset("2"), concurrent_users=2, loops=3)
        log = await run_scenario(scenario, live_server.base_url, sample_resources=True, sample_interval_ms=50)
        assert log.meta.resources["samples"]
        assert "cpuPercent" in log.meta.resources["summary"]

    async def test_failed_login_is_an_action_error(self, live_server):
        script = builtin_script("Add100", loops=1)
        broken = replace(script, actions=(Login("admin", "wrong"),) + script.actions)
        user = await VirtualUser(0, broken, live_server.base_url, time.perf_counter()).run()
        assert user.iterations_completed == 0
        assert [e.kind for e in user.events if e.error_flag] == [REQUEST, ACTION]

    async def test_time_decomposition_on_loopback(self, live_server, tmp_path):
        access_log = tmp_path / "access.log"
        setup_access_log(access_log, to_stdout=False)
        try:
            scenario = Scenario("ops", "Operations", Population.single("Operations"), concurrent_users=2,
                                mode=Mode.NO_REFRESH, loops=2, script_options={"upload_bytes": 50_000})
            log = await run_scenario(scenario, live_server.base_url, sample_resources=False)
            # the last access line is written after the client already has its response
            await asyncio.sleep(0.2)
        finally:
            setup_access_log(None, to_stdout=False)

        table = decompose(log.requests(), parse_access_log(access_log.read_text().splitlines()))
        assert not table.unmatched
        assert all(r.server_ms <= r.total_ms for r in table.matched)
        labels = {op.label for op in table.operations}
        assert {"Create Treatment", "View Treatment", "Update Treatment", "Upload Repository",
                "Assign Content", "Delete Treatment"} <= labels
        assert table.operation("Create Treatment").count == 4


@pytest.fixture
async def refresh_server(tmp_path, server_config):
    store = DocumentStore(tmp_path / "refresh")
    seed_store(store, SeedProfile(clinicians=10, patients=10, contents=100), hash_iterations=FAST_HASH)
    server = ApiServer(replace(server_config, shell_bytes=100_000), store, hash_iterations=FAST_HASH)
    await server.start()
    yield server
    await server.close()
    store.close()


async def test_refresh_costs_requests_and_bytes(refresh_server):
    totals = {}
    for mode in (Mode.REFRESH, Mode.NO_REFRESH):
        scenario = replace(preset("4"), mode=mode)
        totals[mode] = compute_stats(await run_scenario(scenario, refresh_server.base_url, sample_resources=False))

    refresh, no_refresh = totals[Mode.REFRESH], totals[Mode.NO_REFRESH]
    assert refresh.total_request_errors == no_refresh.total_request_errors == 0
    assert no_refresh.total_requests < 0.5 * refresh.total_requests
    assert no_refresh.total_throughput_mb < 0.25 * refresh.total_throughput_mb
