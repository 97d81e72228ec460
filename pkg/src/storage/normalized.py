"""
Normalized engine: SQLAlchemy Core over a single SQLite file with foreign keys on.

Every write is validated synchronously before it reaches SQL (full referential
integrity, types, unknown-field rejection); SQLite's own constraints stay on as
a second line. Deletes of referenced rows are rejected, never cascaded.
"""
from pathlib import Path
from typing import Optional

import orjson
from sqlalchemy import create_engine, event, func, select
from sqlalchemy.exc import IntegrityError
from sqlalchemy.pool import StaticPool

from model import COLLECTION_SPECS, ID_FIELD, BackendKind, Collection, ContentKind, spec_for, with_defaults
from model.ids import NORMALIZED_ID_RE, IdAllocator
from model.validate import check_category_cycle, check_references, check_shape
from storage import DuplicateKey, ReferentialViolation, SchemaViolation, StoreContract
from storage.schema import CONTENT_CHILDREN, TABLE_MAPS, goal_comments, metadata
from vre.logs import get_logger

logger = get_logger(__name__)

DB_NAME = "normalized.db"


def _key(value) -> Optional[int]:
    if isinstance(value, str) and NORMALIZED_ID_RE.match(value):
        return int(value)
    return None


def _enable_foreign_keys(dbapi_connection, _record):
    cursor = dbapi_connection.cursor()
    cursor.execute("PRAGMA foreign_keys=ON")
    cursor.close()


class NormalizedStore(StoreContract):
    kind = BackendKind.NORMALIZED

    def __init__(self, data_dir: Optional[Path] = None):
        super().__init__()
        if data_dir is None:
            self.engine = create_engine("sqlite://", poolclass=StaticPool,
                                        connect_args={"check_same_thread": False})
        else:
            Path(data_dir).mkdir(parents=True, exist_ok=True)
            self.engine = create_engine(f"sqlite:///{Path(data_dir) / DB_NAME}",
                                        connect_args={"check_same_thread": False})
        event.listen(self.engine, "connect", _enable_foreign_keys)
        metadata.create_all(self.engine)
        logger.info(f"normalized store: {self.engine.url}")

        self._ids = {}
        with self.engine.connect() as conn:
            for collection, tmap in TABLE_MAPS.items():
                highest = conn.execute(select(func.max(tmap.table.c.id))).scalar() or 0
                self._ids[collection] = IdAllocator(BackendKind.NORMALIZED, start=highest + 1)

    # --- row <-> document ---

    def _row_to_doc(self, collection: Collection, row, conn) -> dict:
        doc = self._plain_doc(collection, row)
        if collection is Collection.CONTENTS:
            doc["kind"] = self._content_kind(conn, row.id).value
        elif collection is Collection.GOALS:
            doc["comments"] = self._goal_comments(conn, row.id)
        return doc

    @staticmethod
    def _content_kind(conn, content_id: int) -> ContentKind:
        for kind, child in CONTENT_CHILDREN.items():
            if conn.execute(select(child.c.content_id).where(child.c.content_id == content_id)).first():
                return kind
        return ContentKind.OTHER

    @staticmethod
    def _goal_comments(conn, goal_id: int) -> list:
        rows = conn.execute(select(goal_comments).where(goal_comments.c.goal_id == goal_id)
                            .order_by(goal_comments.c.position)).all()
        return [{"authorId": r.author_id, "text": r.text, "timestamp": r.timestamp} for r in rows]

    @staticmethod
    def _doc_to_row(collection: Collection, doc: dict) -> dict:
        tmap = TABLE_MAPS[collection]
        row = {}
        for wire, column in tmap.columns.items():
            value = doc.get(wire)
            if wire in tmap.refs:
                value = _key(value) if value is not None else None
            elif wire in tmap.json_fields:
                value = orjson.dumps(value or {}).decode()
            row[column] = value
        return row

    def _write_children(self, conn, collection: Collection, entity_id: int, doc: dict, replace: bool):
        if collection is Collection.CONTENTS:
            if replace:
                for child in CONTENT_CHILDREN.values():
                    conn.execute(child.delete().where(child.c.content_id == entity_id))
            child = CONTENT_CHILDREN.get(ContentKind(doc.get("kind") or ContentKind.OTHER.value))
            if child is not None:
                conn.execute(child.insert().values(content_id=entity_id))
        elif collection is Collection.GOALS:
            if replace:
                conn.execute(goal_comments.delete().where(goal_comments.c.goal_id == entity_id))
            for position, comment in enumerate(doc.get("comments") or []):
                conn.execute(goal_comments.insert().values(
                    goal_id=entity_id, position=position, author_id=comment["authorId"],
                    text=comment["text"], timestamp=comment["timestamp"]))

    # --- validation ---

    def _validate(self, collection: Collection, doc: dict):
        spec = spec_for(collection)
        unknown = [k for k in doc if k != ID_FIELD and k not in spec.fields]
        if unknown:
            raise SchemaViolation(f"unknown field(s) for {collection.value}: {', '.join(sorted(unknown))}")
        shape = check_shape(collection, doc)
        if shape:
            raise SchemaViolation("; ".join(str(v) for v in shape))
        refs = check_references(collection, doc, self)
        if collection is Collection.CATEGORIES:
            refs += check_category_cycle(doc, self)
        if refs:
            raise ReferentialViolation("; ".join(str(v) for v in refs))
        # uniqueness is left to the UNIQUE constraints

    @staticmethod
    def _raise_integrity(ex: IntegrityError):
        message = str(ex.orig) if ex.orig is not None else str(ex)
        if "UNIQUE" in message:
            raise DuplicateKey(message)
        if "FOREIGN KEY" in message:
            raise ReferentialViolation(message)
        raise SchemaViolation(message)

    # --- contract ---

    def create(self, collection, record, entity_id: Optional[str] = None) -> str:
        collection = Collection(collection)
        doc = with_defaults(collection, self._as_doc(record))
        with self._lock:
            self._check_open()
            self._validate(collection, doc)
            if entity_id is not None:
                key = _key(entity_id)
                if key is None:
                    raise SchemaViolation(f"{entity_id!r} is not a normalized id")
                if self.get(collection, entity_id) is not None:
                    raise DuplicateKey(f"{collection.value} {entity_id} already exists")
            else:
                key = int(self._ids[collection].next())
            tmap = TABLE_MAPS[collection]
            try:
                with self.engine.begin() as conn:
                    conn.execute(tmap.table.insert().values(id=key, **self._doc_to_row(collection, doc)))
                    self._write_children(conn, collection, key, doc, replace=False)
            except IntegrityError as ex:
                self._raise_integrity(ex)
            self.revision += 1
            return str(key)

    def get(self, collection, entity_id: str) -> Optional[dict]:
        collection = Collection(collection)
        key = _key(entity_id)
        if key is None:
            return None
        tmap = TABLE_MAPS[collection]
        with self._lock:
            self._check_open()
            with self.engine.connect() as conn:
                row = conn.execute(select(tmap.table).where(tmap.table.c.id == key)).first()
                return self._row_to_doc(collection, row, conn) if row is not None else None

    def update(self, collection, entity_id: str, patch: dict) -> dict:
        collection = Collection(collection)
        patch = {k: v for k, v in patch.items() if k != ID_FIELD}
        with self._lock:
            current = self.read(collection, entity_id)
            if not patch:
                return current
            merged = {**current, **patch}
            self._validate(collection, merged)
            key = int(entity_id)
            tmap = TABLE_MAPS[collection]
            try:
                with self.engine.begin() as conn:
                    conn.execute(tmap.table.update().where(tmap.table.c.id == key)
                                 .values(**self._doc_to_row(collection, merged)))
                    if collection in (Collection.CONTENTS, Collection.GOALS):
                        self._write_children(conn, collection, key, merged, replace=True)
            except IntegrityError as ex:
                self._raise_integrity(ex)
            self.revision += 1
            return self.read(collection, entity_id)

    def _referrers(self, collection: Collection, entity_id: str) -> list:
        found = []
        for other, spec in COLLECTION_SPECS.items():
            for name, f in spec.references.items():
                if f.ref is not collection:
                    continue
                tmap = TABLE_MAPS[other]
                column = tmap.table.c[tmap.columns[name]]
                with self.engine.connect() as conn:
                    n = conn.execute(select(func.count()).select_from(tmap.table)
                                     .where(column == int(entity_id))).scalar()
                if n:
                    found.append(f"{n} {other.value}.{name}")
        return found

    def delete(self, collection, entity_id: str):
        collection = Collection(collection)
        with self._lock:
            self.read(collection, entity_id)
            referrers = self._referrers(collection, entity_id)
            if referrers:
                raise ReferentialViolation(
                    f"{collection.value} {entity_id} is still referenced by {', '.join(referrers)}")
            tmap = TABLE_MAPS[collection]
            try:
                with self.engine.begin() as conn:
                    conn.execute(tmap.table.delete().where(tmap.table.c.id == int(entity_id)))
            except IntegrityError as ex:
                self._raise_integrity(ex)
            self.revision += 1

    def list(self, collection) -> list:
        collection = Collection(collection)
        tmap = TABLE_MAPS[collection]
        with self._lock:
            self._check_open()
            with self.engine.connect() as conn:
                rows = conn.execute(select(tmap.table).order_by(tmap.table.c.id)).all()
                if collection is Collection.CONTENTS:
                    kinds = {}
                    for kind, child in CONTENT_CHILDREN.items():
                        for (content_id,) in conn.execute(select(child.c.content_id)):
                            kinds[content_id] = kind.value
                    docs = []
                    for row in rows:
                        doc = self._plain_doc(collection, row)
                        doc["kind"] = kinds.get(row.id, ContentKind.OTHER.value)
                        docs.append(doc)
                    return docs
                if collection is Collection.GOALS:
                    comments = {}
                    for r in conn.execute(select(goal_comments).order_by(goal_comments.c.goal_id,
                                                                         goal_comments.c.position)):
                        comments.setdefault(r.goal_id, []).append(
                            {"authorId": r.author_id, "text": r.text, "timestamp": r.timestamp})
                    docs = []
                    for row in rows:
                        doc = self._plain_doc(collection, row)
                        doc["comments"] = comments.get(row.id, [])
                        docs.append(doc)
                    return docs
                return [self._plain_doc(collection, row) for row in rows]

    def _plain_doc(self, collection: Collection, row) -> dict:
        tmap = TABLE_MAPS[collection]
        doc = {ID_FIELD: str(row.id)}
        for wire, column in tmap.columns.items():
            value = getattr(row, column)
            if wire in tmap.refs:
                value = str(value) if value is not None else None
            elif wire in tmap.json_fields:
                value = orjson.loads(value) if value else {}
            doc[wire] = value
        return doc

    def count(self, collection) -> int:
        tmap = TABLE_MAPS[Collection(collection)]
        with self._lock:
            with self.engine.connect() as conn:
                return conn.execute(select(func.count()).select_from(tmap.table)).scalar()

    def close(self):
        with self._lock:
            if self._closed:
                return
            self.engine.dispose()
            self._closed = True
