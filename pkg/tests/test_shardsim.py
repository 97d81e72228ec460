import asyncio
import math

import pytest

from model import Collection
from shardsim import ClusterSpecError, InvalidSplitPoint, MissingShardKey, NoLiveRouter
from shardsim.cluster import ShardCluster
from shardsim.clusterspec import ClusterSpec, load_cluster_spec, parse_cluster_spec
from shardsim.key import RoutingTable, ShardKeySpec
from shardsim.workload import (UnshardedOracle, canonical, generate_queries, generate_records, load_records,
                               run_queries)
from storage import DuplicateKey

KEY = ShardKeySpec("patientId", (5000, 10000))


class TestKey:
    def test_ranges(self):
        assert KEY.range_count == 3
        assert KEY.ranges() == [(-math.inf, 5000), (5000, 10000), (10000, math.inf)]
        assert [KEY.range_index(v) for v in (1, 4999, 5000, 10000, 99999)] == [0, 0, 1, 2, 2]

    @pytest.mark.parametrize("points", [(10, 5), (5, 5), (1, math.inf), ("a",)])
    def test_bad_split_points(self, points):
        with pytest.raises(InvalidSplitPoint):
            ShardKeySpec("patientId", points)

    @pytest.mark.parametrize("record", [{}, {"patientId": None}, {"patientId": "12"}, {"patientId": True}])
    def test_missing_or_unroutable_key(self, record):
        with pytest.raises(MissingShardKey):
            KEY.key_of(record)

    def test_split_keeps_owner_of_lower_half(self):
        table = RoutingTable(1, KEY, (1, 2, 3))
        split = table.split(7500, 4)
        assert split.version == 2
        assert split.shard_ids == (1, 2, 4, 3)
        assert split.owner({"patientId": 7499}) == 2
        assert split.owner({"patientId": 7500}) == 4
        assert split.range_of(4) == (7500, 10000)
        with pytest.raises(InvalidSplitPoint):
            split.split(7500, 5)


class TestRouting:
    async def test_keyed_and_keyless_fanout(self):
        cluster = ShardCluster(KEY)
        oracle = UnshardedOracle()
        records = generate_records(10_000, 15_000)
        await load_records(cluster, oracle, records)
        assert cluster.record_count() == 10_000
        assert cluster.partition_violations() == []

        result = await run_queries(cluster, oracle, generate_queries(300, 15_000))
        assert result.ok, (result.routing_errors[:3], result.mismatches[:3])
        assert result.contacted == {1: 200, 3: 100}

    async def test_point_read(self):
        cluster = ShardCluster(KEY)
        entity_id = await cluster.insert({"patientId": 12_000, "description": "walk"})
        doc = await cluster.get(12_000, entity_id)
        assert doc["description"] == "walk"
        assert cluster.shard_counts() == {1: 0, 2: 0, 3: 1}

    async def test_insert_without_key(self):
        cluster = ShardCluster(KEY)
        with pytest.raises(MissingShardKey):
            await cluster.insert({"description": "walk"})
        assert cluster.record_count() == 0

    async def test_replicas_follow_primary(self):
        cluster = ShardCluster(KEY, replica_count=2)
        await load_records(cluster, UnshardedOracle(), generate_records(300, 15_000))
        assert cluster.replica_mismatches() == []

    async def test_shard_insert_is_idempotent(self):
        cluster = ShardCluster(KEY)
        record = {"_id": "a" * 24, "patientId": 42, "description": "walk"}
        await cluster.insert(record)
        await cluster.insert(record)
        assert cluster.record_count() == 1
        with pytest.raises(DuplicateKey):
            await cluster.insert({**record, "description": "run"})


class TestAddShard:
    async def test_split_preserves_records_and_answers(self):
        cluster = ShardCluster(KEY)
        oracle = UnshardedOracle()
        await load_records(cluster, oracle, generate_records(3000, 15_000, seed=7))
        before = canonical(cluster.all_records())

        new_id = await cluster.add_shard(7500)
        assert new_id == 4
        assert cluster.table.version == 2
        assert cluster.record_count() == 3000
        assert canonical(cluster.all_records()) == before
        assert cluster.partition_violations() == []
        assert all(7500 <= r["patientId"] < 10_000 for r in cluster.shards[4].records())

        result = await run_queries(cluster, oracle, generate_queries(90, 15_000, seed=7))
        assert result.ok
        assert result.contacted == {1: 60, 4: 30}

    async def test_split_under_concurrent_inserts(self):
        cluster = ShardCluster(KEY, hop_latency_ms=0.2)
        oracle = UnshardedOracle()
        records = generate_records(400, 15_000, seed=11)

        async def writer():
            await load_records(cluster, oracle, records)

        async def splitter():
            await asyncio.sleep(0.01)
            await cluster.add_shard(2500)
            await cluster.add_shard(12_500)

        await asyncio.gather(writer(), splitter())
        assert cluster.record_count() == oracle.count() == 400
        assert cluster.partition_violations() == []
        assert len(cluster.routers[0].table.shard_ids) == 5

    async def test_existing_boundary(self):
        cluster = ShardCluster(KEY)
        with pytest.raises(InvalidSplitPoint):
            await cluster.add_shard(5000)


class TestFailover:
    async def test_one_dead_router_fails_nothing(self):
        cluster = ShardCluster(KEY, routers=2)
        oracle = UnshardedOracle()
        records = generate_records(500, 15_000)
        await load_records(cluster, oracle, records[:250])
        cluster.fail_router(1)
        await load_records(cluster, oracle, records[250:])
        result = await run_queries(cluster, oracle, generate_queries(60, 15_000))
        assert result.ok
        assert cluster.record_count() == 500
        assert cluster.router(2).handled > cluster.router(1).handled

    async def test_router_dying_before_ack_does_not_duplicate(self):
        cluster = ShardCluster(KEY, routers=2)
        cluster.routers[0].kill_after = 1
        oracle = UnshardedOracle()
        await load_records(cluster, oracle, generate_records(50, 15_000))
        assert not cluster.routers[0].alive
        assert cluster.record_count() == 50
        assert canonical(cluster.all_records()) == canonical(oracle.store.list(Collection.GOALS))

    async def test_no_live_router(self):
        cluster = ShardCluster(KEY, routers=2)
        cluster.fail_router(1)
        cluster.fail_router(2)
        with pytest.raises(NoLiveRouter):
            await cluster.query({"patientId": 1})

    async def test_revived_router_gets_current_table(self):
        cluster = ShardCluster(KEY, routers=2)
        cluster.fail_router(2)
        await cluster.add_shard(7500)
        cluster.revive_router(2)
        assert cluster.router(2).table is cluster.table

    def test_needs_a_router(self):
        with pytest.raises(NoLiveRouter):
            ShardCluster(KEY, routers=0)


class TestClusterSpec:
    def test_parse(self):
        spec = parse_cluster_spec("fieldName = patientId\nsplitPoints = 4000, 8000.5\nreplicas = 1\n"
                                  "routers = 3\nhopLatencyMs = 0.5\n")
        assert spec.split_points == (4000, 8000.5)
        assert spec.shard_count == 3
        assert (spec.replicas, spec.routers, spec.hop_latency_ms) == (1, 3, 0.5)

    def test_shards_with_range_size(self):
        assert parse_cluster_spec("shards = 4\nrangeSize = 1000").split_points == (1000, 2000, 3000)
        assert ClusterSpec().split_points == (5000, 10000)

    @pytest.mark.parametrize("text", [
        "shards = 2\nsplitPoints = 10, 20",
        "splitPoints = 20, 10",
        "routers = 0",
        "replicas = -1",
        "records = lots",
        "colour = red",
        "splitPoints = a, b",
        "no equals here",
    ])
    def test_bad_specs(self, text):
        with pytest.raises(ClusterSpecError):
            parse_cluster_spec(text)

    def test_load(self, tmp_path):
        path = tmp_path / "cluster.conf"
        path.write_text("shards = 3\nrecords = 100\n")
        assert load_cluster_spec(path).records == 100
        with pytest.raises(ClusterSpecError):
            load_cluster_spec(tmp_path / "absent.conf")

    async def test_build(self):
        cluster = ClusterSpec(split_points=(100,), routers=3, replicas=1).build()
        assert len(cluster.shards) == 2
        assert len(cluster.routers) == 3
