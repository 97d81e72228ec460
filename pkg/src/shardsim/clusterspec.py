from dataclasses import dataclass, field
from pathlib import Path

from model import Collection
from shardsim import ClusterSpecError, InvalidSplitPoint
from shardsim.cluster import ShardCluster
from shardsim.key import DEFAULT_SHARD_KEY, ShardKeySpec
from vre.config import parse_kv_lines
from vre.errors import BadConfig

KNOWN_KEYS = {"fieldName", "splitPoints", "shards", "rangeSize", "replicas", "routers", "hopLatencyMs", "records",
              "keyMax", "queries", "seed"}


@dataclass(frozen=True)
class ClusterSpec:
    field_name: str = DEFAULT_SHARD_KEY
    split_points: tuple = (5000, 10000)
    replicas: int = 0
    routers: int = 2
    hop_latency_ms: float = 0.0
    records: int = 10_000
    key_max: int = 15_000
    queries: int = 300
    seed: int = 2015
    collection: Collection = field(default=Collection.GOALS)

    @property
    def shard_count(self) -> int:
        return len(self.split_points) + 1

    def key(self) -> ShardKeySpec:
        try:
            return ShardKeySpec(self.field_name, self.split_points)
        except InvalidSplitPoint as ex:
            raise ClusterSpecError(str(ex))

    def build(self) -> ShardCluster:
        """Must be called with an event loop running."""
        return ShardCluster(self.key(), routers=self.routers, replica_count=self.replicas,
                            hop_latency_ms=self.hop_latency_ms, collection=self.collection)


def _number(values: dict, key: str, cast, default):
    raw = values.get(key)
    if raw is None:
        return default
    try:
        number = cast(raw)
    except ValueError:
        raise ClusterSpecError(f"{key}: expected a number, got {raw!r}")
    if number < 0:
        raise ClusterSpecError(f"{key}: must not be negative")
    return number


def parse_cluster_spec(text: str, source: str = "<string>") -> ClusterSpec:
    """
    `key = value` lines:

        fieldName = patientId
        splitPoints = 5000, 10000     # or: shards = 3 with rangeSize = 5000
        replicas = 1
        routers = 2
        hopLatencyMs = 0.5
        records = 10000
        keyMax = 15000
        queries = 300
        seed = 2015
    """
    try:
        values = parse_kv_lines(text, source)
    except BadConfig as ex:
        raise ClusterSpecError(str(ex))
    unknown = set(values) - KNOWN_KEYS
    if unknown:
        raise ClusterSpecError(f"{source}: unknown key(s) {', '.join(sorted(unknown))}")

    shards = _number(values, "shards", int, None)
    if "splitPoints" in values:
        try:
            points = tuple(float(p) if "." in p else int(p) for p in
                           (s.strip() for s in values["splitPoints"].split(",")) if p)
        except ValueError:
            raise ClusterSpecError(f"{source}: splitPoints must be a comma-separated list of numbers")
        if shards is not None and shards != len(points) + 1:
            raise ClusterSpecError(f"{source}: {len(points)} split points make {len(points) + 1} shards, not {shards}")
    elif shards is not None:
        if shards < 1:
            raise ClusterSpecError(f"{source}: shards must be at least 1")
        size = _number(values, "rangeSize", int, 5000)
        points = tuple(size * i for i in range(1, shards))
    else:
        points = ClusterSpec.split_points

    routers = _number(values, "routers", int, 2)
    if routers < 1:
        raise ClusterSpecError(f"{source}: routers must be at least 1")

    spec = ClusterSpec(
        field_name=values.get("fieldName", DEFAULT_SHARD_KEY),
        split_points=points,
        replicas=_number(values, "replicas", int, 0),
        routers=routers,
        hop_latency_ms=_number(values, "hopLatencyMs", float, 0.0),
        records=_number(values, "records", int, 10_000),
        key_max=_number(values, "keyMax", int, 15_000),
        queries=_number(values, "queries", int, 300),
        seed=_number(values, "seed", int, 2015),
    )
    spec.key()
    return spec


def load_cluster_spec(path: Path) -> ClusterSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as ex:
        raise ClusterSpecError(f"cannot read {path}: {ex.strerror}")
    return parse_cluster_spec(text, source=str(path))
