"""
Document engine: flexible schema, in-memory collections, single-file journal.

The journal is a sequence of length-prefixed frames, each an orjson document
{"c": collection, "op": "put" | "del", "id": id, "doc": document}. Replaying the
file from the start rebuilds every collection. A torn frame at the tail (crash
mid-append) is dropped on replay.

Under the Journaled concern a write is appended to the journal before it is
acknowledged. Under AcknowledgedUnjournaled the frame only joins the staging
queue; the background flusher (or flush()) moves staged frames to the journal,
and crash() throws away whatever is still staged.
"""
import asyncio
import os
import struct
from pathlib import Path
from typing import Optional

import orjson

from model import ID_FIELD, BackendKind, Collection, missing_required, with_defaults
from model.ids import IdAllocator
from model.validate import check_unique
from storage import DuplicateKey, NotFound, SchemaViolation, StoreContract, WriteConcern, WriteMode
from vre.logs import get_logger

logger = get_logger(__name__)

HEADER = struct.Struct(">I")
JOURNAL_NAME = "document.journal"


class Journal:
    """Append-only frame log on disk, or in memory when no path is given."""

    def __init__(self, path: Optional[Path], fsync: bool = False):
        self.path = path
        self.fsync = fsync
        self._buffer = bytearray()
        self._fh = None
        # end of the last complete frame seen by frames()
        self.valid_length = 0
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(path, "ab")

    @staticmethod
    def encode(collection: str, op: str, entity_id: str, doc: Optional[dict]) -> bytes:
        payload = orjson.dumps({"c": collection, "op": op, "id": entity_id, "doc": doc})
        return HEADER.pack(len(payload)) + payload

    def append(self, frames: list):
        if not frames:
            return
        data = b"".join(frames)
        if self._fh is None:
            self._buffer += data
            return
        self._fh.write(data)
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())

    def read_all(self) -> bytes:
        if self.path is None:
            return bytes(self._buffer)
        if not self.path.exists():
            return b""
        return self.path.read_bytes()

    def frames(self):
        data = self.read_all()
        offset = 0
        self.valid_length = 0
        while offset + HEADER.size <= len(data):
            (length,) = HEADER.unpack_from(data, offset)
            start = offset + HEADER.size
            if start + length > len(data):
                break
            yield orjson.loads(data[start:start + length])
            offset = start + length
            self.valid_length = offset
        if offset < len(data):
            logger.warning(f"journal: dropping torn frame at byte {offset}")

    def truncate_torn_tail(self) -> int:
        """Cuts the file back to valid_length so later appends are not swallowed by a torn frame."""
        size = len(self.read_all())
        torn = size - self.valid_length
        if torn <= 0:
            return 0
        if self.path is None:
            del self._buffer[self.valid_length:]
        else:
            if self._fh is not None:
                self._fh.flush()
            os.truncate(self.path, self.valid_length)
        return torn

    def reopen(self):
        self.close()
        if self.path is not None:
            self._fh = open(self.path, "ab")

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


class DocumentStore(StoreContract):
    kind = BackendKind.DOCUMENT

    def __init__(self, data_dir: Optional[Path] = None, write_concern: WriteConcern = WriteConcern(),
                 fsync: bool = False):
        super().__init__()
        self.write_concern = write_concern
        path = Path(data_dir) / JOURNAL_NAME if data_dir is not None else None
        self.journal = Journal(path, fsync=fsync)
        self._ids = IdAllocator(BackendKind.DOCUMENT)
        self._collections: dict = {}
        self._staged: list = []
        self.task_flusher = None
        self._replay()

    def _replay(self):
        self._collections = {c.value: {} for c in Collection}
        count = 0
        for frame in self.journal.frames():
            docs = self._collections[frame["c"]]
            if frame["op"] == "put":
                docs[frame["id"]] = frame["doc"]
            else:
                docs.pop(frame["id"], None)
            count += 1
        torn = self.journal.truncate_torn_tail()
        if torn:
            logger.warning(f"document store: truncated {torn} torn journal bytes")
        if count:
            logger.info(f"document store: replayed {count} journal frames")

    # --- write path ---

    def _write(self, collection: str, op: str, entity_id: str, doc: Optional[dict]):
        frame = Journal.encode(collection, op, entity_id, doc)
        if self.write_concern.mode is WriteMode.JOURNALED:
            self.journal.append([frame])
        else:
            self._staged.append(frame)
        self.revision += 1

    def flush(self) -> int:
        """Moves every staged frame to the journal; returns how many were written."""
        with self._lock:
            staged, self._staged = self._staged, []
            self.journal.append(staged)
            return len(staged)

    def crash(self):
        """Simulates a process crash: staged frames vanish and state is rebuilt from the journal."""
        with self._lock:
            lost = len(self._staged)
            self._staged = []
            self.journal.reopen()
            self._replay()
            if lost:
                logger.warning(f"document store: crash discarded {lost} staged writes")
            return lost

    @property
    def staged_count(self) -> int:
        return len(self._staged)

    async def start(self):
        if self.write_concern.mode is WriteMode.ACKNOWLEDGED_UNJOURNALED and self.task_flusher is None:
            self.task_flusher = asyncio.create_task(self._flush_loop())

    async def stop(self):
        if self.task_flusher:
            self.task_flusher.cancel()
            self.task_flusher = None
        self.flush()

    async def _flush_loop(self):
        while True:
            await asyncio.sleep(self.write_concern.flush_interval_ms / 1000)
            try:
                self.flush()
            except OSError as ex:
                logger.error(f"document store: flush failed: {ex}")

    # --- contract ---

    def _docs(self, collection) -> dict:
        return self._collections[Collection(collection).value]

    def create(self, collection, record, entity_id: Optional[str] = None) -> str:
        collection = Collection(collection)
        doc = with_defaults(collection, self._as_doc(record))
        with self._lock:
            self._check_open()
            missing = missing_required(collection, doc)
            if missing:
                raise SchemaViolation(f"missing required field(s): {', '.join(missing)}")
            docs = self._docs(collection)
            entity_id = entity_id or self._ids.next()
            if entity_id in docs:
                raise DuplicateKey(f"{collection.value} {entity_id} already exists")
            duplicates = check_unique(collection, doc, docs.values())
            if duplicates:
                raise DuplicateKey(str(duplicates[0]))
            stored = self._copy({ID_FIELD: entity_id, **doc})
            docs[entity_id] = stored
            self._write(collection.value, "put", entity_id, stored)
            return entity_id

    def get(self, collection, entity_id: str) -> Optional[dict]:
        with self._lock:
            self._check_open()
            doc = self._docs(collection).get(entity_id)
            return self._copy(doc) if doc is not None else None

    def update(self, collection, entity_id: str, patch: dict) -> dict:
        collection = Collection(collection)
        patch = {k: v for k, v in patch.items() if k != ID_FIELD}
        with self._lock:
            self._check_open()
            docs = self._docs(collection)
            current = docs.get(entity_id)
            if current is None:
                raise NotFound(f"{collection.value} {entity_id} not found")
            if not patch:
                return self._copy(current)
            merged = self._copy({**current, **patch})
            missing = missing_required(collection, merged)
            if missing:
                raise SchemaViolation(f"missing required field(s): {', '.join(missing)}")
            duplicates = check_unique(collection, merged, docs.values())
            if duplicates:
                raise DuplicateKey(str(duplicates[0]))
            docs[entity_id] = merged
            self._write(collection.value, "put", entity_id, merged)
            return self._copy(merged)

    def delete(self, collection, entity_id: str):
        collection = Collection(collection)
        with self._lock:
            self._check_open()
            docs = self._docs(collection)
            if entity_id not in docs:
                raise NotFound(f"{collection.value} {entity_id} not found")
            # orphans are allowed: nothing cascades
            del docs[entity_id]
            self._write(collection.value, "del", entity_id, None)

    def list(self, collection) -> list:
        with self._lock:
            self._check_open()
            return [self._copy(doc) for doc in self._docs(collection).values()]

    def count(self, collection) -> int:
        with self._lock:
            return len(self._docs(collection))

    def close(self):
        with self._lock:
            if self._closed:
                return
            self.flush()
            self.journal.close()
            self._closed = True
