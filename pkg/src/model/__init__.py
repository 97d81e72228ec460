"""Domain entities shared by both storage backends, the HTTP API and the seeders.

Every entity serializes to a flat key-value document. Wire names are camelCase,
except the two content descriptions which keep the repository's snake_case
(`patient_description`, `clinician_description`). The id travels as `_id`.
"""
import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, ClassVar, Optional

ID_FIELD = "_id"


class BackendKind(str, Enum):
    DOCUMENT = "document"
    NORMALIZED = "normalized"


class Role(str, Enum):
    ADMINISTRATOR = "Administrator"
    CLINICIAN = "Clinician"
    PATIENT = "Patient"


class Term(str, Enum):
    # extensible: goals run over "varying durations"
    SHORT = "Short"
    LONG = "Long"


class ContentKind(str, Enum):
    VIDEO = "Video"
    AUDIO = "Audio"
    TEXT = "Text"
    OTHER = "Other"

    @classmethod
    def from_media_type(cls, media_type: str) -> "ContentKind":
        major = (media_type or "").split("/", 1)[0].lower()
        return {"video": cls.VIDEO, "audio": cls.AUDIO, "text": cls.TEXT}.get(major, cls.OTHER)


class Collection(str, Enum):
    ACCOUNTS = "Accounts"
    ADMINISTRATORS = "Administrators"
    CATEGORIES = "Categories"
    CLINICIANS = "Clinicians"
    CLINICIANS_PATIENTS = "CliniciansPatients"
    CONTENTS = "Contents"
    GOALS = "Goals"
    INFORMATION = "Information"
    PATIENTS = "Patients"
    TREATMENT_CONTENT = "TreatmentContent"
    TREATMENTS = "Treatments"


@dataclass(frozen=True)
class FieldSpec:
    kind: str  # str | int | ref | enum | map | list
    required: bool = False
    default: Any = None
    ref: Optional[Collection] = None
    ref_role: Optional[Role] = None
    choices: tuple = ()


@dataclass(frozen=True)
class CollectionSpec:
    collection: Collection
    route: str
    fields: dict
    unique: tuple = ()
    # link rows that must carry exactly one of these reference fields
    exactly_one_of: tuple = ()

    @property
    def references(self) -> dict:
        return {name: f for name, f in self.fields.items() if f.kind == "ref"}

    def default_for(self, name: str):
        spec = self.fields[name]
        if spec.kind == "map":
            return dict(spec.default or {})
        if spec.kind == "list":
            return list(spec.default or [])
        return spec.default


def _ref(target: Collection, required=True, role: Optional[Role] = None) -> FieldSpec:
    return FieldSpec("ref", required=required, ref=target, ref_role=role)


def _enum(enum_cls, required=True, default=None) -> FieldSpec:
    return FieldSpec("enum", required=required, default=default, choices=tuple(e.value for e in enum_cls))


COLLECTION_SPECS: dict = {
    Collection.ACCOUNTS: CollectionSpec(
        Collection.ACCOUNTS, "account",
        {
            "username": FieldSpec("str", required=True),
            "salt": FieldSpec("str", required=True),
            "passwordHash": FieldSpec("str", required=True),
            "role": _enum(Role),
        },
        unique=(("username",),),
    ),
    Collection.ADMINISTRATORS: CollectionSpec(
        Collection.ADMINISTRATORS, "administrator",
        {
            "accountId": _ref(Collection.ACCOUNTS, role=Role.ADMINISTRATOR),
            "displayName": FieldSpec("str", required=True),
        },
    ),
    Collection.CATEGORIES: CollectionSpec(
        Collection.CATEGORIES, "category",
        {
            "name": FieldSpec("str", required=True),
            "parentId": _ref(Collection.CATEGORIES, required=False),
        },
    ),
    Collection.CLINICIANS: CollectionSpec(
        Collection.CLINICIANS, "clinician",
        {
            "accountId": _ref(Collection.ACCOUNTS, role=Role.CLINICIAN),
            "displayName": FieldSpec("str", required=True),
        },
    ),
    Collection.CLINICIANS_PATIENTS: CollectionSpec(
        Collection.CLINICIANS_PATIENTS, "clinicianpatient",
        {
            "clinicianId": _ref(Collection.CLINICIANS),
            "patientId": _ref(Collection.PATIENTS),
        },
        unique=(("clinicianId", "patientId"),),
    ),
    Collection.CONTENTS: CollectionSpec(
        Collection.CONTENTS, "repository",
        {
            "name": FieldSpec("str", required=True),
            "mediaType": FieldSpec("str", default="application/octet-stream"),
            "patient_description": FieldSpec("str", default=""),
            "clinician_description": FieldSpec("str", default=""),
            "categoryId": _ref(Collection.CATEGORIES),
            "path": FieldSpec("str", required=True),
            "creatorId": _ref(Collection.ACCOUNTS),
            "kind": _enum(ContentKind, required=False, default=ContentKind.OTHER.value),
        },
    ),
    Collection.GOALS: CollectionSpec(
        Collection.GOALS, "goal",
        {
            "patientId": _ref(Collection.PATIENTS),
            "description": FieldSpec("str", required=True),
            "term": _enum(Term, required=False, default=Term.SHORT.value),
            "comments": FieldSpec("list", default=()),
        },
    ),
    Collection.INFORMATION: CollectionSpec(
        Collection.INFORMATION, "information",
        {
            "patientId": _ref(Collection.PATIENTS),
            "title": FieldSpec("str", required=True),
            "body": FieldSpec("str", default=""),
        },
    ),
    Collection.PATIENTS: CollectionSpec(
        Collection.PATIENTS, "patient",
        {
            "accountId": _ref(Collection.ACCOUNTS, role=Role.PATIENT),
            "displayName": FieldSpec("str", required=True),
            "interfaceConfig": FieldSpec("map", default=None),
        },
    ),
    Collection.TREATMENT_CONTENT: CollectionSpec(
        Collection.TREATMENT_CONTENT, "treatmentcontent",
        {
            "treatmentId": _ref(Collection.TREATMENTS, required=False),
            "informationId": _ref(Collection.INFORMATION, required=False),
            "contentId": _ref(Collection.CONTENTS),
        },
        unique=(("treatmentId", "contentId"), ("informationId", "contentId")),
        exactly_one_of=("treatmentId", "informationId"),
    ),
    Collection.TREATMENTS: CollectionSpec(
        Collection.TREATMENTS, "treatment",
        {
            "patientId": _ref(Collection.PATIENTS),
            "title": FieldSpec("str", required=True),
            "description": FieldSpec("str", default=""),
            "repetitionsPerDay": FieldSpec("int", default=0),
        },
    ),
}

PROFILE_COLLECTIONS = {
    Role.ADMINISTRATOR: Collection.ADMINISTRATORS,
    Role.CLINICIAN: Collection.CLINICIANS,
    Role.PATIENT: Collection.PATIENTS,
}

SECRET_ACCOUNT_FIELDS = ("salt", "passwordHash")


def spec_for(collection) -> CollectionSpec:
    return COLLECTION_SPECS[Collection(collection)]


def with_defaults(collection, doc: dict) -> dict:
    """Fills every known field the caller left out; unknown fields pass through untouched."""
    spec = spec_for(collection)
    out = {k: v for k, v in doc.items() if k != ID_FIELD}
    for name in spec.fields:
        if name not in out:
            out[name] = spec.default_for(name)
    return out


def missing_required(collection, doc: dict) -> list:
    spec = spec_for(collection)
    return [name for name, f in spec.fields.items() if f.required and doc.get(name) in (None, "")]


def public_account(doc: dict) -> dict:
    """API-facing account document: never carries the salt or password hash."""
    return {k: v for k, v in doc.items() if k not in SECRET_ACCOUNT_FIELDS}


def _camel(name: str) -> str:
    head, *rest = name.split("_")
    return head + "".join(part.title() for part in rest)


def _wire_name(f: dataclasses.Field) -> str:
    if f.name == "id":
        return ID_FIELD
    return f.metadata.get("wire", _camel(f.name))


class Entity:
    collection: ClassVar[Collection]

    def to_doc(self) -> dict:
        doc = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Enum):
                value = value.value
            elif f.name == "comments":
                value = [c.to_doc() for c in value]
            elif isinstance(value, dict):
                value = dict(value)
            doc[_wire_name(f)] = value
        return doc

    @classmethod
    def from_doc(cls, doc: dict):
        kwargs = {}
        for f in dataclasses.fields(cls):
            wire = _wire_name(f)
            if wire not in doc:
                continue
            value = doc[wire]
            if f.name == "comments":
                value = tuple(GoalComment.from_doc(c) for c in value or ())
            elif f.name == "role":
                value = Role(value)
            elif f.name == "term":
                value = Term(value)
            elif f.name == "kind":
                value = ContentKind(value)
            kwargs[f.name] = value
        return cls(**kwargs)


@dataclass(frozen=True)
class GoalComment:
    author_id: str
    text: str
    timestamp: str

    def to_doc(self) -> dict:
        return {"authorId": self.author_id, "text": self.text, "timestamp": self.timestamp}

    @classmethod
    def from_doc(cls, doc: dict) -> "GoalComment":
        return cls(author_id=doc["authorId"], text=doc["text"], timestamp=doc["timestamp"])


@dataclass(frozen=True)
class Account(Entity):
    collection: ClassVar[Collection] = Collection.ACCOUNTS
    username: str
    salt: str
    password_hash: str
    role: Role
    id: Optional[str] = None


@dataclass(frozen=True)
class Administrator(Entity):
    collection: ClassVar[Collection] = Collection.ADMINISTRATORS
    account_id: str
    display_name: str
    id: Optional[str] = None


@dataclass(frozen=True)
class Clinician(Entity):
    collection: ClassVar[Collection] = Collection.CLINICIANS
    account_id: str
    display_name: str
    id: Optional[str] = None


@dataclass(frozen=True)
class Patient(Entity):
    collection: ClassVar[Collection] = Collection.PATIENTS
    account_id: str
    display_name: str
    interface_config: dict = field(default_factory=dict)
    id: Optional[str] = None


@dataclass(frozen=True)
class ClinicianPatientLink(Entity):
    collection: ClassVar[Collection] = Collection.CLINICIANS_PATIENTS
    clinician_id: str
    patient_id: str
    id: Optional[str] = None


@dataclass(frozen=True)
class Goal(Entity):
    collection: ClassVar[Collection] = Collection.GOALS
    patient_id: str
    description: str
    term: Term = Term.SHORT
    comments: tuple = ()
    id: Optional[str] = None


@dataclass(frozen=True)
class Treatment(Entity):
    collection: ClassVar[Collection] = Collection.TREATMENTS
    patient_id: str
    title: str
    description: str = ""
    repetitions_per_day: int = 0
    id: Optional[str] = None


@dataclass(frozen=True)
class Information(Entity):
    collection: ClassVar[Collection] = Collection.INFORMATION
    patient_id: str
    title: str
    body: str = ""
    id: Optional[str] = None


@dataclass(frozen=True)
class Category(Entity):
    collection: ClassVar[Collection] = Collection.CATEGORIES
    name: str
    parent_id: Optional[str] = None
    id: Optional[str] = None


@dataclass(frozen=True)
class Content(Entity):
    collection: ClassVar[Collection] = Collection.CONTENTS
    name: str
    category_id: str
    path: str
    creator_id: str
    media_type: str = "application/octet-stream"
    patient_description: str = field(default="", metadata={"wire": "patient_description"})
    clinician_description: str = field(default="", metadata={"wire": "clinician_description"})
    kind: ContentKind = ContentKind.OTHER
    id: Optional[str] = None


@dataclass(frozen=True)
class TreatmentContentLink(Entity):
    collection: ClassVar[Collection] = Collection.TREATMENT_CONTENT
    treatment_id: str
    content_id: str
    id: Optional[str] = None

    def to_doc(self) -> dict:
        doc = super().to_doc()
        doc["informationId"] = None
        return doc


@dataclass(frozen=True)
class InformationContentLink(Entity):
    collection: ClassVar[Collection] = Collection.TREATMENT_CONTENT
    information_id: str
    content_id: str
    id: Optional[str] = None

    def to_doc(self) -> dict:
        doc = super().to_doc()
        doc["treatmentId"] = None
        return doc


ENTITY_TYPES = {
    Collection.ACCOUNTS: Account,
    Collection.ADMINISTRATORS: Administrator,
    Collection.CATEGORIES: Category,
    Collection.CLINICIANS: Clinician,
    Collection.CLINICIANS_PATIENTS: ClinicianPatientLink,
    Collection.CONTENTS: Content,
    Collection.GOALS: Goal,
    Collection.INFORMATION: Information,
    Collection.PATIENTS: Patient,
    Collection.TREATMENTS: Treatment,
}


def entity_from_doc(collection, doc: dict) -> Entity:
    collection = Collection(collection)
    if collection is Collection.TREATMENT_CONTENT:
        if doc.get("informationId") is not None:
            return InformationContentLink.from_doc(doc)
        return TreatmentContentLink.from_doc(doc)
    return ENTITY_TYPES[collection].from_doc(doc)
