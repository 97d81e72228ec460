from dataclasses import dataclass
from typing import Iterable, Optional, Protocol, Union

from model import ID_FIELD, Collection, Entity, spec_for


class Reader(Protocol):
    def get(self, collection, entity_id: str) -> Optional[dict]: ...

    def list(self, collection) -> list: ...


@dataclass(frozen=True)
class Violation:
    field: str
    code: str  # dangling | empty | duplicate | role | type | choice | link | cycle
    message: str

    def __str__(self):
        return self.message


def _type_ok(kind: str, value) -> bool:
    if value is None:
        return True
    if kind in ("str", "ref", "enum"):
        return isinstance(value, str)
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool) and value >= 0
    if kind == "map":
        return isinstance(value, dict)
    if kind == "list":
        return isinstance(value, list)
    return True


def check_shape(collection, doc: dict) -> list:
    """Violations visible without looking at the store: empty fields, types, enum values, link arity."""
    spec = spec_for(collection)
    violations = []
    for name, f in spec.fields.items():
        value = doc.get(name)
        if f.required and value in (None, ""):
            violations.append(Violation(name, "empty", f"empty {name}"))
            continue
        if not _type_ok(f.kind, value):
            violations.append(Violation(name, "type", f"bad type for {name}"))
            continue
        if f.choices and value is not None and value not in f.choices:
            violations.append(Violation(name, "choice", f"{name} must be one of {', '.join(f.choices)}"))

    if spec.exactly_one_of:
        present = [n for n in spec.exactly_one_of if doc.get(n) is not None]
        if len(present) != 1:
            violations.append(Violation("|".join(spec.exactly_one_of), "link",
                                        f"exactly one of {', '.join(spec.exactly_one_of)} required"))

    if collection == Collection.GOALS and isinstance(doc.get("comments"), list):
        for comment in doc["comments"]:
            if not isinstance(comment, dict) or not {"authorId", "text", "timestamp"} <= comment.keys():
                violations.append(Violation("comments", "type", "comments need authorId, text and timestamp"))
                break
    return violations


def check_references(collection, doc: dict, store: Reader) -> list:
    spec = spec_for(collection)
    violations = []
    for name, f in spec.references.items():
        value = doc.get(name)
        if value is None or not isinstance(value, str):
            continue
        target = store.get(f.ref, value)
        if target is None:
            violations.append(Violation(name, "dangling", f"dangling {name}"))
        elif f.ref_role is not None and target.get("role") != f.ref_role.value:
            violations.append(Violation(name, "role", f"{name} must reference a {f.ref_role.value} account"))
    return violations


def check_unique(collection, doc: dict, others: Iterable) -> list:
    spec = spec_for(collection)
    own_id = doc.get(ID_FIELD)
    violations = []
    for group in spec.unique:
        key = tuple(doc.get(n) for n in group)
        if any(v is None for v in key):
            continue
        for other in others:
            if other.get(ID_FIELD) != own_id and tuple(other.get(n) for n in group) == key:
                what = "duplicate link" if len(group) > 1 else f"duplicate {group[0]}"
                violations.append(Violation(",".join(group), "duplicate", what))
                break
    return violations


def check_category_cycle(doc: dict, store: Reader) -> list:
    own_id = doc.get(ID_FIELD)
    seen = {own_id} if own_id else set()
    parent = doc.get("parentId")
    while parent is not None:
        if parent in seen:
            return [Violation("parentId", "cycle", "category cycle")]
        seen.add(parent)
        node = store.get(Collection.CATEGORIES, parent)
        parent = node.get("parentId") if node else None
    return []


def validate_entity(record: Union[Entity, dict], store: Reader, collection=None) -> list:
    """Returns every violated invariant; an empty list means the record is valid."""
    if isinstance(record, Entity):
        collection = record.collection
        doc = record.to_doc()
    else:
        if collection is None:
            raise ValueError("collection is required for a raw document")
        doc = record
    collection = Collection(collection)

    violations = check_shape(collection, doc)
    violations += check_references(collection, doc, store)
    violations += check_unique(collection, doc, store.list(collection))
    if collection is Collection.CATEGORIES:
        violations += check_category_cycle(doc, store)
    return violations


def validate_store(store: Reader) -> dict:
    """Validates every stored record; maps (collection, id) to its violations, valid records omitted."""
    report = {}
    for collection in Collection:
        for doc in store.list(collection):
            violations = validate_entity(doc, store, collection=collection)
            if violations:
                report[(collection.value, doc[ID_FIELD])] = violations
    return report
