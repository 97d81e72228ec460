"""
Equivalence oracle: replays one operation sequence on both engines and diffs what
an API client would observe.

Ids differ between engines, so operations name records by creation ordinal
(`Ref(n)` is the n-th create of the sequence) and every id in a result is
rewritten to `#n` before comparing.
"""
import random
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from model import ID_FIELD, Collection, ContentKind, Role, Term, spec_for
from storage import ReferentialViolation, SchemaViolation, StoreContract, StoreError
from storage.document import DocumentStore
from storage.normalized import NormalizedStore
from vre.logs import get_logger

logger = get_logger(__name__)

EXPECTED = "expected-by-design"
CONSEQUENCE = "consequence"
UNEXPECTED = "unexpected"


@dataclass(frozen=True)
class Ref:
    ordinal: int


@dataclass(frozen=True)
class Op:
    kind: str  # create | read | update | delete | list | query
    collection: Collection
    doc: dict = field(default_factory=dict)
    target: Optional[int] = None


@dataclass(frozen=True)
class Divergence:
    index: int
    op: Op
    normalized: Any
    document: Any
    classification: str


@dataclass
class Verdict:
    operations: int = 0
    divergences: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(d.classification == UNEXPECTED for d in self.divergences)

    @property
    def identical(self) -> bool:
        return not self.divergences


class _Replay:
    def __init__(self, store: StoreContract):
        self.store = store
        self.ids: list = []
        # normalized ids repeat across tables, so ordinals are looked up per collection
        self.ordinals: dict = {}

    def resolve(self, value):
        if isinstance(value, Ref):
            if value.ordinal < len(self.ids) and self.ids[value.ordinal] is not None:
                return self.ids[value.ordinal]
            return "0"  # the referenced create failed: hand over an id that cannot exist
        if isinstance(value, dict):
            return {k: self.resolve(v) for k, v in value.items()}
        if isinstance(value, list):
            return [self.resolve(v) for v in value]
        return value

    def _ordinal(self, collection: Collection, entity_id):
        ordinal = self.ordinals.get((collection, entity_id))
        return f"#{ordinal}" if ordinal is not None else entity_id

    def normalize_doc(self, collection: Collection, doc: dict) -> dict:
        references = spec_for(collection).references
        out = {}
        for name, value in doc.items():
            if name == ID_FIELD:
                value = self._ordinal(collection, value)
            elif name in references and value is not None:
                value = self._ordinal(references[name].ref, value)
            out[name] = value
        return out

    def apply(self, op: Op):
        target = self.resolve(Ref(op.target)) if op.target is not None else None
        try:
            if op.kind == "create":
                try:
                    new_id = self.store.create(op.collection, self.resolve(op.doc))
                except StoreError:
                    self.ids.append(None)
                    raise
                self.ordinals[(op.collection, new_id)] = len(self.ids)
                self.ids.append(new_id)
                result = self._ordinal(op.collection, new_id)
            elif op.kind == "read":
                result = self.normalize_doc(op.collection, self.store.read(op.collection, target))
            elif op.kind == "update":
                result = self.normalize_doc(op.collection,
                                            self.store.update(op.collection, target, self.resolve(op.doc)))
            elif op.kind == "delete":
                self.store.delete(op.collection, target)
                result = "deleted"
            elif op.kind == "list":
                result = [self.normalize_doc(op.collection, d) for d in self.store.list(op.collection)]
            elif op.kind == "query":
                result = [self.normalize_doc(op.collection, d)
                          for d in self.store.query(op.collection, self.resolve(op.doc))]
            else:
                raise ValueError(f"unknown op kind {op.kind!r}")
        except StoreError as ex:
            return ("error", type(ex).__name__)
        return ("ok", result)


def _classify(norm, doc, seen_expected: bool) -> str:
    strict_errors = (ReferentialViolation.__name__, SchemaViolation.__name__)
    if norm[0] == "error" and norm[1] in strict_errors and doc[0] == "ok":
        return EXPECTED
    if seen_expected:
        return CONSEQUENCE
    return UNEXPECTED


def equivalence_oracle(ops: list, data_root: Optional[Path] = None) -> Verdict:
    """Replays `ops` on a fresh normalized and a fresh document store (Journaled) and diffs the results."""
    with tempfile.TemporaryDirectory(dir=data_root) as tmp:
        normalized = NormalizedStore(Path(tmp) / "normalized")
        document = DocumentStore(Path(tmp) / "document")
        try:
            a, b = _Replay(normalized), _Replay(document)
            verdict = Verdict(operations=len(ops))
            seen_expected = False
            for index, op in enumerate(ops):
                ra, rb = a.apply(op), b.apply(op)
                if ra != rb:
                    classification = _classify(ra, rb, seen_expected)
                    seen_expected = seen_expected or classification == EXPECTED
                    verdict.divergences.append(Divergence(index, op, ra, rb, classification))
        finally:
            normalized.close()
            document.close()
    if verdict.divergences:
        logger.info(f"oracle: {len(verdict.divergences)} divergences over {len(ops)} ops")
    return verdict


class _Model:
    """Book-keeping for the generator: which ordinals are alive, who references whom."""

    def __init__(self):
        self.next_ordinal = 0
        self.alive: dict = {}  # ordinal -> collection
        self.roles: dict = {}  # account ordinal -> Role
        self.refs: dict = {}  # ordinal -> list of referenced ordinals
        self.pairs: dict = {}  # ordinal -> unique pair key
        self.used_pairs: set = set()
        self.usernames = 0

    def of(self, collection: Collection) -> list:
        return [o for o, c in self.alive.items() if c is collection]

    def referenced(self, ordinal: int) -> bool:
        return any(ordinal in refs for o, refs in self.refs.items() if o in self.alive)

    def add(self, collection: Collection, refs: list, pair=None) -> int:
        ordinal = self.next_ordinal
        self.next_ordinal += 1
        self.alive[ordinal] = collection
        self.refs[ordinal] = refs
        if pair is not None:
            self.pairs[ordinal] = pair
            self.used_pairs.add(pair)
        return ordinal

    def remove(self, ordinal: int):
        self.alive.pop(ordinal)
        pair = self.pairs.pop(ordinal, None)
        if pair is not None:
            self.used_pairs.discard(pair)


def _create_op(rng: random.Random, m: _Model) -> Op:
    candidates = [Collection.ACCOUNTS, Collection.CATEGORIES]
    accounts_by_role = {r: [o for o in m.of(Collection.ACCOUNTS) if m.roles[o] is r] for r in Role}
    patients = m.of(Collection.PATIENTS)
    if accounts_by_role[Role.ADMINISTRATOR]:
        candidates.append(Collection.ADMINISTRATORS)
    if accounts_by_role[Role.CLINICIAN]:
        candidates.append(Collection.CLINICIANS)
    if accounts_by_role[Role.PATIENT]:
        candidates.append(Collection.PATIENTS)
    if patients:
        candidates += [Collection.GOALS, Collection.TREATMENTS, Collection.INFORMATION]
    if patients and m.of(Collection.CLINICIANS):
        candidates.append(Collection.CLINICIANS_PATIENTS)
    if m.of(Collection.CATEGORIES) and m.of(Collection.ACCOUNTS):
        candidates.append(Collection.CONTENTS)
    if m.of(Collection.CONTENTS) and (m.of(Collection.TREATMENTS) or m.of(Collection.INFORMATION)):
        candidates.append(Collection.TREATMENT_CONTENT)

    collection = rng.choice(candidates)
    n = m.next_ordinal
    pair = None
    if collection is Collection.ACCOUNTS:
        role = rng.choice(list(Role))
        m.usernames += 1
        doc, refs = {"username": f"user{m.usernames}", "salt": "c2FsdA==", "passwordHash": f"h{n}",
                     "role": role.value}, []
    elif collection in (Collection.ADMINISTRATORS, Collection.CLINICIANS, Collection.PATIENTS):
        role = {Collection.ADMINISTRATORS: Role.ADMINISTRATOR, Collection.CLINICIANS: Role.CLINICIAN,
                Collection.PATIENTS: Role.PATIENT}[collection]
        account = rng.choice(accounts_by_role[role])
        doc, refs = {"accountId": Ref(account), "displayName": f"Person {n}"}, [account]
        if collection is Collection.PATIENTS:
            doc["interfaceConfig"] = {"fontScale": rng.choice([1, 2, 3])}
    elif collection is Collection.CATEGORIES:
        parents = m.of(Collection.CATEGORIES)
        parent = rng.choice(parents) if parents and rng.random() < 0.5 else None
        doc = {"name": f"Category {n}", "parentId": Ref(parent) if parent is not None else None}
        refs = [parent] if parent is not None else []
    elif collection is Collection.CLINICIANS_PATIENTS:
        free = [(c, p) for c in m.of(Collection.CLINICIANS) for p in patients if ("cp", c, p) not in m.used_pairs]
        if not free:
            return _create_op_fallback(m)
        c, p = rng.choice(free)
        doc, refs, pair = {"clinicianId": Ref(c), "patientId": Ref(p)}, [c, p], ("cp", c, p)
    elif collection is Collection.GOALS:
        p = rng.choice(patients)
        doc, refs = {"patientId": Ref(p), "description": f"walk {n} m", "term": rng.choice(list(Term)).value,
                     "comments": []}, [p]
    elif collection is Collection.TREATMENTS:
        p = rng.choice(patients)
        doc, refs = {"patientId": Ref(p), "title": f"Exercise {n}", "description": "reach for a glass",
                     "repetitionsPerDay": rng.randint(0, 10)}, [p]
    elif collection is Collection.INFORMATION:
        p = rng.choice(patients)
        doc, refs = {"patientId": Ref(p), "title": f"Advice {n}", "body": "guidance booklet"}, [p]
    elif collection is Collection.CONTENTS:
        cat, creator = rng.choice(m.of(Collection.CATEGORIES)), rng.choice(m.of(Collection.ACCOUNTS))
        doc = {"name": f"Clip {n}", "mediaType": "video/mp4", "patient_description": "p",
               "clinician_description": "c", "categoryId": Ref(cat), "path": f"/repo/{n}.mp4",
               "creatorId": Ref(creator), "kind": rng.choice(list(ContentKind)).value}
        refs = [cat, creator]
    else:
        owners = [("t", o) for o in m.of(Collection.TREATMENTS)] + [("i", o) for o in m.of(Collection.INFORMATION)]
        free = [(kind, o, c) for kind, o in owners for c in m.of(Collection.CONTENTS)
                if (kind, o, c) not in m.used_pairs]
        if not free:
            return _create_op_fallback(m)
        kind, owner, content = rng.choice(free)
        doc = {"treatmentId": Ref(owner) if kind == "t" else None,
               "informationId": Ref(owner) if kind == "i" else None, "contentId": Ref(content)}
        refs, pair = [owner, content], (kind, owner, content)

    ordinal = m.add(collection, refs, pair)
    if collection is Collection.ACCOUNTS:
        m.roles[ordinal] = Role(doc["role"])
    return Op("create", collection, doc)


def _create_op_fallback(m: _Model) -> Op:
    ordinal = m.add(Collection.CATEGORIES, [])
    return Op("create", Collection.CATEGORIES, {"name": f"Category {ordinal}", "parentId": None})


UPDATES = {
    Collection.ACCOUNTS: lambda rng, n: {"passwordHash": f"rehash{n}"},
    Collection.ADMINISTRATORS: lambda rng, n: {"displayName": f"Admin {n}"},
    Collection.CLINICIANS: lambda rng, n: {"displayName": f"Dr {n}"},
    Collection.PATIENTS: lambda rng, n: {"interfaceConfig": {"fontScale": rng.randint(1, 4)}},
    Collection.CATEGORIES: lambda rng, n: {"name": f"Renamed {n}"},
    Collection.CONTENTS: lambda rng, n: {"name": f"Renamed clip {n}"},
    Collection.GOALS: lambda rng, n: {"description": f"walk {n} m", "term": rng.choice(list(Term)).value,
                                      "comments": [{"authorId": "physio", "text": "going well",
                                                    "timestamp": "2015-08-20T10:00:00Z"}]},
    Collection.TREATMENTS: lambda rng, n: {"repetitionsPerDay": rng.randint(0, 20)},
    Collection.INFORMATION: lambda rng, n: {"body": f"updated {n}"},
    Collection.CLINICIANS_PATIENTS: lambda rng, n: {},
    Collection.TREATMENT_CONTENT: lambda rng, n: {},
}


def random_valid_ops(seed: int, count: int) -> list:
    """A referentially valid CRUD sequence: deletes only hit records nothing alive references."""
    rng = random.Random(seed)
    m = _Model()
    ops = []
    while len(ops) < count:
        roll = rng.random()
        alive = list(m.alive)
        if roll < 0.45 or not alive:
            ops.append(_create_op(rng, m))
        elif roll < 0.6:
            ordinal = rng.choice(alive)
            ops.append(Op("read", m.alive[ordinal], target=ordinal))
        elif roll < 0.8:
            ordinal = rng.choice(alive)
            collection = m.alive[ordinal]
            ops.append(Op("update", collection, UPDATES[collection](rng, len(ops)), target=ordinal))
        elif roll < 0.9:
            ops.append(Op("list", rng.choice(list(Collection))))
        else:
            free = [o for o in alive if not m.referenced(o)]
            if not free:
                continue
            ordinal = rng.choice(free)
            ops.append(Op("delete", m.alive[ordinal], target=ordinal))
            m.remove(ordinal)
    return ops


def canonical_dump(store: StoreContract) -> dict:
    """Every collection with ids replaced by per-collection creation ordinals, for diffing two stores."""
    ordinals = {}
    for collection in Collection:
        for i, doc in enumerate(store.list(collection)):
            ordinals[(collection, doc[ID_FIELD])] = f"#{i}"

    def rewrite(collection: Collection, doc: dict) -> dict:
        references = spec_for(collection).references
        out = {}
        for name, value in doc.items():
            if name == ID_FIELD:
                value = ordinals[(collection, value)]
            elif name in references and value is not None:
                value = ordinals.get((references[name].ref, value), value)
            out[name] = value
        return out

    return {c.value: [rewrite(c, d) for d in store.list(c)] for c in Collection}


def dump_divergences(a: StoreContract, b: StoreContract) -> list:
    """(collection, ordinal, a_doc, b_doc) for every record the two stores disagree on."""
    dump_a, dump_b = canonical_dump(a), canonical_dump(b)
    found = []
    for collection in dump_a:
        docs_a, docs_b = dump_a[collection], dump_b[collection]
        for i in range(max(len(docs_a), len(docs_b))):
            doc_a = docs_a[i] if i < len(docs_a) else None
            doc_b = docs_b[i] if i < len(docs_b) else None
            if doc_a != doc_b:
                found.append((collection, i, doc_a, doc_b))
    return found


def dangling_insert_ops() -> list:
    """A goal pointing at a patient that never existed, followed by a read-back."""
    return [
        Op("create", Collection.GOALS, {"patientId": "000000000000000000000000", "description": "walk 10m",
                                        "term": Term.SHORT.value}),
        Op("list", Collection.GOALS),
    ]


