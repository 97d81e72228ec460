"""Backend-neutral storage contract.

Both engines keep the eleven collections of the platform and speak flat
documents whose id travels as `_id`. The normalized engine enforces every
foreign key on each write; the document engine only checks that required
fields are present and lets writes be staged before they reach its journal.
"""
import copy
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional, Union

from model import ID_FIELD, BackendKind, Collection, Entity
from vre.errors import VreError


class StoreError(VreError):
    pass


class NotFound(StoreError):
    pass


class ReferentialViolation(StoreError):
    pass


class DuplicateKey(StoreError):
    pass


class SchemaViolation(StoreError):
    pass


class StoreClosed(StoreError):
    pass


class WriteMode(str, Enum):
    JOURNALED = "Journaled"
    ACKNOWLEDGED_UNJOURNALED = "AcknowledgedUnjournaled"


@dataclass(frozen=True)
class WriteConcern:
    mode: WriteMode = WriteMode.JOURNALED
    flush_interval_ms: int = 100

    def __post_init__(self):
        if self.flush_interval_ms <= 0:
            raise ValueError("flush_interval_ms must be positive")

    @classmethod
    def from_name(cls, name: str, flush_interval_ms: int = 100) -> "WriteConcern":
        mode = WriteMode.JOURNALED if name.lower() == "journaled" else WriteMode.ACKNOWLEDGED_UNJOURNALED
        return cls(mode=mode, flush_interval_ms=flush_interval_ms)


Record = Union[Entity, dict]


class StoreContract(ABC):
    """CRUD + query over the eleven collections; every operation is linearizable per store."""

    kind: BackendKind

    def __init__(self):
        self._lock = threading.RLock()
        self._closed = False
        self.revision = 0

    @staticmethod
    def _as_doc(record: Record) -> dict:
        if isinstance(record, Entity):
            doc = record.to_doc()
            if doc.get(ID_FIELD) is None:
                doc.pop(ID_FIELD, None)
            return doc
        return dict(record)

    def _check_open(self):
        if self._closed:
            raise StoreClosed(f"{self.kind.value} store is closed")

    @abstractmethod
    def create(self, collection, record: Record, entity_id: Optional[str] = None) -> str:
        ...

    @abstractmethod
    def get(self, collection, entity_id: str) -> Optional[dict]:
        ...

    def read(self, collection, entity_id: str) -> dict:
        doc = self.get(collection, entity_id)
        if doc is None:
            raise NotFound(f"{Collection(collection).value} {entity_id} not found")
        return doc

    def exists(self, collection, entity_id: str) -> bool:
        return self.get(collection, entity_id) is not None

    @abstractmethod
    def update(self, collection, entity_id: str, patch: dict) -> dict:
        ...

    @abstractmethod
    def delete(self, collection, entity_id: str):
        ...

    @abstractmethod
    def list(self, collection) -> list:
        """All records of a collection in insertion order."""

    def query(self, collection, predicate: dict) -> list:
        return [doc for doc in self.list(collection)
                if all(doc.get(k) == v for k, v in predicate.items())]

    def count(self, collection) -> int:
        return len(self.list(collection))

    def dump(self) -> Iterator[tuple]:
        for collection in Collection:
            for doc in self.list(collection):
                yield collection.value, doc

    @abstractmethod
    def close(self):
        ...

    @staticmethod
    def _copy(doc: dict) -> dict:
        return copy.deepcopy(doc)


def open_store(backend: Union[str, BackendKind], data_dir: Optional[Path],
               write_concern: Optional[WriteConcern] = None) -> StoreContract:
    backend = BackendKind(backend)
    if backend is BackendKind.DOCUMENT:
        from storage.document import DocumentStore
        return DocumentStore(data_dir, write_concern=write_concern or WriteConcern())
    from storage.normalized import NormalizedStore
    return NormalizedStore(data_dir)
