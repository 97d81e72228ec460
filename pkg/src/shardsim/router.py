import asyncio
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

from shardsim import RouterDown
from shardsim.key import RoutingTable
from shardsim.shard import hop

if TYPE_CHECKING:
    from shardsim.cluster import ShardCluster


@dataclass(frozen=True)
class QueryResult:
    records: list
    shards_contacted: int
    table_version: int


class Router:
    """Maps requests to shards through its copy of the routing table."""

    def __init__(self, router_id: int, cluster: "ShardCluster", table: RoutingTable, latency_ms: float = 0.0):
        self.id = router_id
        self.cluster = cluster
        self.table = table
        self.latency_ms = latency_ms
        self.alive = True
        self.handled = 0
        # dies after forwarding this many more requests, before acknowledging the last one
        self.kill_after: Optional[int] = None

    def _check_alive(self):
        if not self.alive:
            raise RouterDown(f"router {self.id} is down")

    def _after_forward(self):
        self.handled += 1
        if self.kill_after is None:
            return
        self.kill_after -= 1
        if self.kill_after <= 0:
            self.alive = False
            self.kill_after = None
            raise RouterDown(f"router {self.id} died before acknowledging")

    async def insert(self, doc: dict) -> str:
        self._check_alive()
        async with self.cluster.request_slot():
            table = self.table
            shard = self.cluster.shards[table.owner(doc)]
            await hop(self.latency_ms)
            self._check_alive()
            entity_id = await shard.insert(doc)
        self._after_forward()
        return entity_id

    async def query(self, predicate: dict) -> QueryResult:
        self._check_alive()
        async with self.cluster.request_slot():
            table = self.table
            key = table.key
            if key.field_name in predicate:
                targets = [table.owner_of_key(key.key_of(predicate))]
            else:
                # scatter-gather: every shard is asked, results merged in shard order
                targets = list(table.shard_ids)
            await hop(self.latency_ms)
            self._check_alive()
            parts = await asyncio.gather(*(self.cluster.shards[sid].query(predicate) for sid in targets))
        self._after_forward()
        records = [doc for part in parts for doc in part]
        return QueryResult(records, len(targets), table.version)

    async def get(self, key_value, entity_id: str) -> Optional[dict]:
        """Targeted point read; the caller supplies the shard key of the record."""
        self._check_alive()
        async with self.cluster.request_slot():
            shard = self.cluster.shards[self.table.owner_of_key(key_value)]
            await hop(self.latency_ms)
            doc = await shard.get(entity_id)
        self._after_forward()
        return doc
