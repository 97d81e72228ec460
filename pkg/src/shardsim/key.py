import bisect
import math
from dataclasses import dataclass
from numbers import Real

from shardsim import InvalidSplitPoint, MissingShardKey

DEFAULT_SHARD_KEY = "patientId"


@dataclass(frozen=True)
class ShardKeySpec:
    """
    Split points cut the numeric key space into contiguous ranges:
    [-inf, s1), [s1, s2), ..., [sn, +inf). Range i (0-based) is owned by one
    shard; the routing table keeps which.
    """
    field_name: str = DEFAULT_SHARD_KEY
    split_points: tuple = ()

    def __post_init__(self):
        points = list(self.split_points)
        if any(not isinstance(p, Real) or not math.isfinite(p) for p in points):
            raise InvalidSplitPoint(f"split points must be finite numbers, got {points}")
        if points != sorted(set(points)):
            raise InvalidSplitPoint(f"split points must be strictly increasing, got {points}")

    @property
    def range_count(self) -> int:
        return len(self.split_points) + 1

    def ranges(self) -> list:
        bounds = [-math.inf, *self.split_points, math.inf]
        return list(zip(bounds[:-1], bounds[1:]))

    def key_of(self, record: dict):
        value = record.get(self.field_name)
        if value is None:
            raise MissingShardKey(f"record has no {self.field_name}")
        if isinstance(value, bool) or not isinstance(value, Real):
            raise MissingShardKey(f"{self.field_name} must be numeric to route, got {value!r}")
        return value

    def range_index(self, value) -> int:
        return bisect.bisect_right(self.split_points, value)

    def with_split(self, point) -> "ShardKeySpec":
        if not isinstance(point, Real) or not math.isfinite(point):
            raise InvalidSplitPoint(f"split point must be a finite number, got {point!r}")
        if point in self.split_points:
            raise InvalidSplitPoint(f"{point} is already a range boundary")
        return ShardKeySpec(self.field_name, tuple(sorted((*self.split_points, point))))


@dataclass(frozen=True)
class RoutingTable:
    """Immutable; a topology change builds a new table with the next version."""
    version: int
    key: ShardKeySpec
    # shard id per range, aligned with key.ranges()
    shard_ids: tuple

    def __post_init__(self):
        if len(self.shard_ids) != self.key.range_count:
            raise InvalidSplitPoint(f"{len(self.shard_ids)} shards for {self.key.range_count} ranges")

    def owner(self, record: dict) -> int:
        return self.shard_ids[self.key.range_index(self.key.key_of(record))]

    def owner_of_key(self, value) -> int:
        return self.shard_ids[self.key.range_index(value)]

    def range_of(self, shard_id: int) -> tuple:
        return self.key.ranges()[self.shard_ids.index(shard_id)]

    def split(self, point, new_shard_id: int) -> "RoutingTable":
        """The range holding point keeps its shard below point and hands [point, hi) to new_shard_id."""
        idx = self.key.range_index(point)
        shard_ids = list(self.shard_ids)
        shard_ids.insert(idx + 1, new_shard_id)
        return RoutingTable(self.version + 1, self.key.with_split(point), tuple(shard_ids))
