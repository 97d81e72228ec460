"""Seeded records, generated query suites and the unsharded oracle the cluster is checked against."""
import random
from collections import Counter
from dataclasses import dataclass, field

import orjson

from model import ID_FIELD, Collection, Term
from shardsim.cluster import ShardCluster
from storage.document import DocumentStore

DESCRIPTIONS = ("Walk unaided", "Climb stairs", "Lift the cup", "Stand from a chair", "Grip the rail")


def generate_records(count: int, key_max: int, seed: int = 2015, field_name: str = "patientId") -> list:
    rng = random.Random(seed)
    terms = [t.value for t in Term]
    return [
        {
            ID_FIELD: f"{rng.getrandbits(96):024x}",
            field_name: rng.randint(1, key_max),
            "description": f"{rng.choice(DESCRIPTIONS)} #{i}",
            "term": rng.choice(terms),
        }
        for i in range(count)
    ]


def generate_queries(count: int, key_max: int, seed: int = 2015, field_name: str = "patientId") -> list:
    """Keyed, keyless and keyed-plus-filter predicates in equal shares."""
    rng = random.Random(seed + 1)
    terms = [t.value for t in Term]
    queries = []
    for i in range(count):
        shape = i % 3
        if shape == 0:
            queries.append({field_name: rng.randint(1, key_max)})
        elif shape == 1:
            queries.append({"term": rng.choice(terms)})
        else:
            queries.append({field_name: rng.randint(1, key_max), "term": rng.choice(terms)})
    return queries


def canonical(records: list) -> Counter:
    """Order-free multiset of records."""
    return Counter(orjson.dumps(r, option=orjson.OPT_SORT_KEYS) for r in records)


class UnshardedOracle:
    def __init__(self, collection: Collection = Collection.GOALS):
        self.collection = collection
        self.store = DocumentStore()

    def insert(self, record: dict):
        self.store.create(self.collection, record, entity_id=record[ID_FIELD])

    def query(self, predicate: dict) -> list:
        return self.store.query(self.collection, predicate)

    def count(self) -> int:
        return self.store.count(self.collection)


@dataclass
class WorkloadResult:
    queries: int = 0
    # (predicate, shards contacted, expected shards)
    routing_errors: list = field(default_factory=list)
    mismatches: list = field(default_factory=list)
    contacted: Counter = field(default_factory=Counter)

    @property
    def ok(self) -> bool:
        return not self.routing_errors and not self.mismatches


async def load_records(cluster: ShardCluster, oracle: UnshardedOracle, records: list) -> int:
    for record in records:
        await cluster.insert(record)
        oracle.insert(record)
    return len(records)


async def run_queries(cluster: ShardCluster, oracle: UnshardedOracle, queries: list) -> WorkloadResult:
    result = WorkloadResult()
    field_name = cluster.table.key.field_name
    for predicate in queries:
        answer = await cluster.query(predicate)
        expected_shards = 1 if field_name in predicate else len(cluster.table.shard_ids)
        result.queries += 1
        result.contacted[answer.shards_contacted] += 1
        if answer.shards_contacted != expected_shards:
            result.routing_errors.append((predicate, answer.shards_contacted, expected_shards))
        if canonical(answer.records) != canonical(oracle.query(predicate)):
            result.mismatches.append(predicate)
    return result
