import asyncio
import contextlib
import secrets
from collections import Counter
from typing import Optional

from model import ID_FIELD, Collection
from shardsim import NoLiveRouter, RouterDown
from shardsim.key import RoutingTable, ShardKeySpec
from shardsim.router import QueryResult, Router
from shardsim.shard import Shard
from vre.logs import get_logger

logger = get_logger(__name__)


class ShardCluster:
    """
    Shards numbered from 1 in creation order, routers numbered from 1.

    Requests enter through request_slot(); add_shard closes the gate, waits for
    in-flight requests to drain, migrates, swaps the routing table on every
    router in one step and reopens the gate, so no request ever routes with a
    table that disagrees with where the records are.
    """

    def __init__(self, key: ShardKeySpec = ShardKeySpec(), routers: int = 2, replica_count: int = 0,
                 hop_latency_ms: float = 0.0, collection: Collection = Collection.GOALS):
        if routers < 1:
            raise NoLiveRouter("a cluster needs at least one router")
        self.collection = collection
        self.replica_count = replica_count
        self.hop_latency_ms = hop_latency_ms
        self.shards = {}
        for _ in range(key.range_count):
            self._new_shard()
        self.table = RoutingTable(1, key, tuple(self.shards))
        self.routers = [Router(i + 1, self, self.table, hop_latency_ms) for i in range(routers)]

        self._gate = asyncio.Event()
        self._gate.set()
        self._idle = asyncio.Condition()
        self._inflight = 0
        self._topology_lock = asyncio.Lock()
        self._next_router = 0
        self.contacted_histogram = Counter()

    def _new_shard(self) -> Shard:
        shard_id = max(self.shards, default=0) + 1
        self.shards[shard_id] = Shard(shard_id, self.collection, self.replica_count, self.hop_latency_ms)
        return self.shards[shard_id]

    # --- request admission ---

    @contextlib.asynccontextmanager
    async def request_slot(self):
        while not self._gate.is_set():
            await self._gate.wait()
        self._inflight += 1
        try:
            yield
        finally:
            self._inflight -= 1
            async with self._idle:
                self._idle.notify_all()

    # --- routers ---

    def router(self, router_id: int) -> Router:
        for r in self.routers:
            if r.id == router_id:
                return r
        raise NoLiveRouter(f"no router {router_id}")

    def fail_router(self, router_id: int):
        self.router(router_id).alive = False
        logger.info(f"router {router_id} failed; {len(self.live_routers())} left")

    def revive_router(self, router_id: int):
        router = self.router(router_id)
        router.table = self.table
        router.alive = True

    def live_routers(self) -> list:
        return [r for r in self.routers if r.alive]

    async def _dispatch(self, call):
        """Round-robin over live routers; a router that dies mid-request hands the retry to the next one."""
        for _ in range(len(self.routers)):
            router = self.routers[self._next_router % len(self.routers)]
            self._next_router += 1
            if not router.alive:
                continue
            try:
                return await call(router)
            except RouterDown as ex:
                logger.debug(f"{ex}; failing over")
        raise NoLiveRouter("every router is down")

    # --- client operations ---

    async def insert(self, record: dict) -> str:
        """Assigns the _id on the client side so a resend after failover is recognised by the shard."""
        doc = dict(record)
        doc.setdefault(ID_FIELD, secrets.token_hex(12))
        self.table.key.key_of(doc)
        return await self._dispatch(lambda r: r.insert(doc))

    async def query(self, predicate: dict) -> QueryResult:
        result = await self._dispatch(lambda r: r.query(predicate))
        self.contacted_histogram[result.shards_contacted] += 1
        return result

    async def get(self, key_value, entity_id: str) -> Optional[dict]:
        return await self._dispatch(lambda r: r.get(key_value, entity_id))

    # --- topology ---

    async def add_shard(self, split_point) -> int:
        """Splits the range holding split_point; [split_point, hi) moves to a new shard. Returns its id."""
        async with self._topology_lock:
            new_id = max(self.shards) + 1
            table = self.table.split(split_point, new_id)
            old = self.shards[self.table.owner_of_key(split_point)]

            self._gate.clear()
            try:
                async with self._idle:
                    await self._idle.wait_for(lambda: self._inflight == 0)
                shard = self._new_shard()
                moved = old.take_where(lambda doc: table.owner(doc) == new_id)
                shard.load(moved)
                self.table = table
                for router in self.routers:
                    router.table = table
            finally:
                self._gate.set()
            logger.info(f"split at {split_point}: shard {old.id} moved {len(moved)} records to shard {new_id} "
                        f"(routing table v{table.version})")
            return new_id

    # --- inspection ---

    def record_count(self) -> int:
        return sum(s.count() for s in self.shards.values())

    def shard_counts(self) -> dict:
        return {sid: s.count() for sid, s in self.shards.items()}

    def all_records(self) -> list:
        return [doc for s in self.shards.values() for doc in s.records()]

    def partition_violations(self) -> list:
        """(shard id, _id) of every record that sits on a shard other than its key's owner."""
        misplaced = []
        for sid, shard in self.shards.items():
            for doc in shard.records():
                if self.table.owner(doc) != sid:
                    misplaced.append((sid, doc[ID_FIELD]))
        return misplaced

    def replica_mismatches(self) -> list:
        return [sid for sid, s in self.shards.items() if any(c != s.count() for c in s.replica_counts())]
