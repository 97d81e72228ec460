import asyncio
from typing import Optional

from model import ID_FIELD, Collection
from storage import DuplicateKey
from storage.document import DocumentStore
from vre.logs import get_logger

logger = get_logger(__name__)


async def hop(latency_ms: float):
    if latency_ms > 0:
        await asyncio.sleep(latency_ms / 1000)


class Shard:
    """One range of the key space on an in-memory document engine, with passive replica copies."""

    def __init__(self, shard_id: int, collection: Collection = Collection.GOALS, replica_count: int = 0,
                 latency_ms: float = 0.0):
        self.id = shard_id
        self.collection = collection
        self.latency_ms = latency_ms
        self.primary = DocumentStore()
        self.replicas = [DocumentStore() for _ in range(replica_count)]
        self.write_lock = asyncio.Lock()
        self.contacts = 0

    async def insert(self, doc: dict) -> str:
        """Idempotent on the client-supplied _id: a resend of an applied insert acks without a second copy."""
        await hop(self.latency_ms)
        self.contacts += 1
        async with self.write_lock:
            entity_id = doc[ID_FIELD]
            existing = self.primary.get(self.collection, entity_id)
            if existing is not None:
                if any(existing.get(k) != v for k, v in doc.items()):
                    raise DuplicateKey(f"shard {self.id}: {entity_id} already holds a different record")
                return entity_id
            self.primary.create(self.collection, doc, entity_id=entity_id)
            # primary-ack: replicas are brought up to date before the ack leaves the shard
            for replica in self.replicas:
                replica.create(self.collection, doc, entity_id=entity_id)
            return entity_id

    async def query(self, predicate: dict) -> list:
        await hop(self.latency_ms)
        self.contacts += 1
        return self.primary.query(self.collection, predicate)

    async def get(self, entity_id: str) -> Optional[dict]:
        await hop(self.latency_ms)
        self.contacts += 1
        return self.primary.get(self.collection, entity_id)

    def take_where(self, belongs) -> list:
        """Removes and returns every record for which belongs(record) holds; used by migration."""
        moved = [doc for doc in self.primary.list(self.collection) if belongs(doc)]
        for doc in moved:
            for store in (self.primary, *self.replicas):
                store.delete(self.collection, doc[ID_FIELD])
        return moved

    def load(self, docs: list):
        for doc in docs:
            for store in (self.primary, *self.replicas):
                store.create(self.collection, doc, entity_id=doc[ID_FIELD])

    def records(self) -> list:
        return self.primary.list(self.collection)

    def count(self) -> int:
        return self.primary.count(self.collection)

    def replica_counts(self) -> list:
        return [r.count(self.collection) for r in self.replicas]
