"""Normalized schema: one table per collection, content inheritance, goal comments as a child table."""
from dataclasses import dataclass, field

from sqlalchemy import (CheckConstraint, Column, ForeignKey, Integer, MetaData, String, Table, Text,
                        UniqueConstraint)

from model import Collection, ContentKind

metadata = MetaData()

accounts = Table(
    "accounts", metadata,
    Column("id", Integer, primary_key=True, autoincrement=False),
    Column("username", String(255), nullable=False, unique=True),
    Column("salt", String(255), nullable=False),
    Column("password_hash", String(255), nullable=False),
    Column("role", String(32), nullable=False),
)

administrators = Table(
    "administrators", metadata,
    Column("id", Integer, primary_key=True, autoincrement=False),
    Column("account_id", Integer, ForeignKey("accounts.id"), nullable=False),
    Column("display_name", String(255), nullable=False),
)

clinicians = Table(
    "clinicians", metadata,
    Column("id", Integer, primary_key=True, autoincrement=False),
    Column("account_id", Integer, ForeignKey("accounts.id"), nullable=False),
    Column("display_name", String(255), nullable=False),
)

patients = Table(
    "patients", metadata,
    Column("id", Integer, primary_key=True, autoincrement=False),
    Column("account_id", Integer, ForeignKey("accounts.id"), nullable=False),
    Column("display_name", String(255), nullable=False),
    Column("interface_config", Text, nullable=False, default="{}"),
)

clinicians_patients = Table(
    "clinicians_patients", metadata,
    Column("id", Integer, primary_key=True, autoincrement=False),
    Column("clinician_id", Integer, ForeignKey("clinicians.id"), nullable=False),
    Column("patient_id", Integer, ForeignKey("patients.id"), nullable=False),
    UniqueConstraint("clinician_id", "patient_id", name="uniq_clinicians_patients0pair"),
)

categories = Table(
    "categories", metadata,
    Column("id", Integer, primary_key=True, autoincrement=False),
    Column("name", String(255), nullable=False),
    Column("parent_id", Integer, ForeignKey("categories.id"), nullable=True),
)

contents = Table(
    "contents", metadata,
    Column("id", Integer, primary_key=True, autoincrement=False),
    Column("name", String(255), nullable=False),
    Column("media_type", String(255), nullable=False),
    Column("patient_description", Text, nullable=False),
    Column("clinician_description", Text, nullable=False),
    Column("category_id", Integer, ForeignKey("categories.id"), nullable=False),
    Column("path", Text, nullable=False),
    Column("creator_id", Integer, ForeignKey("accounts.id"), nullable=False),
)


def _content_child(name: str) -> Table:
    # Child tables only hold the id of the parent content, ready for kind-specific metadata.
    return Table(
        name, metadata,
        Column("content_id", Integer, ForeignKey("contents.id", ondelete="CASCADE"), primary_key=True),
    )


content_videos = _content_child("content_videos")
content_audios = _content_child("content_audios")
content_texts = _content_child("content_texts")

CONTENT_CHILDREN = {
    ContentKind.VIDEO: content_videos,
    ContentKind.AUDIO: content_audios,
    ContentKind.TEXT: content_texts,
}

goals = Table(
    "goals", metadata,
    Column("id", Integer, primary_key=True, autoincrement=False),
    Column("patient_id", Integer, ForeignKey("patients.id"), nullable=False),
    Column("description", Text, nullable=False),
    Column("term", String(16), nullable=False),
)

goal_comments = Table(
    "goal_comments", metadata,
    Column("id", Integer, primary_key=True),
    Column("goal_id", Integer, ForeignKey("goals.id", ondelete="CASCADE"), nullable=False),
    Column("position", Integer, nullable=False),
    Column("author_id", String(64), nullable=False),
    Column("text", Text, nullable=False),
    Column("timestamp", String(64), nullable=False),
)

information = Table(
    "information", metadata,
    Column("id", Integer, primary_key=True, autoincrement=False),
    Column("patient_id", Integer, ForeignKey("patients.id"), nullable=False),
    Column("title", String(255), nullable=False),
    Column("body", Text, nullable=False),
)

treatments = Table(
    "treatments", metadata,
    Column("id", Integer, primary_key=True, autoincrement=False),
    Column("patient_id", Integer, ForeignKey("patients.id"), nullable=False),
    Column("title", String(255), nullable=False),
    Column("description", Text, nullable=False),
    Column("repetitions_per_day", Integer, nullable=False),
    CheckConstraint("repetitions_per_day >= 0", name="ck_treatments0repetitions"),
)

treatment_contents = Table(
    "treatment_contents", metadata,
    Column("id", Integer, primary_key=True, autoincrement=False),
    Column("treatment_id", Integer, ForeignKey("treatments.id"), nullable=True),
    Column("information_id", Integer, ForeignKey("information.id"), nullable=True),
    Column("content_id", Integer, ForeignKey("contents.id"), nullable=False),
    UniqueConstraint("treatment_id", "content_id", name="uniq_treatment_contents0treatment"),
    UniqueConstraint("information_id", "content_id", name="uniq_treatment_contents0information"),
    CheckConstraint("(treatment_id IS NULL) <> (information_id IS NULL)", name="ck_treatment_contents0owner"),
)


@dataclass(frozen=True)
class TableMap:
    """How one collection's wire fields land in its table's columns."""
    table: Table
    columns: dict  # wire field -> column name
    refs: tuple = ()  # wire fields holding integer ids
    json_fields: tuple = ()
    computed: dict = field(default_factory=dict)


TABLE_MAPS = {
    Collection.ACCOUNTS: TableMap(accounts, {
        "username": "username", "salt": "salt", "passwordHash": "password_hash", "role": "role"}),
    Collection.ADMINISTRATORS: TableMap(administrators, {
        "accountId": "account_id", "displayName": "display_name"}, refs=("accountId",)),
    Collection.CLINICIANS: TableMap(clinicians, {
        "accountId": "account_id", "displayName": "display_name"}, refs=("accountId",)),
    Collection.PATIENTS: TableMap(patients, {
        "accountId": "account_id", "displayName": "display_name", "interfaceConfig": "interface_config"},
        refs=("accountId",), json_fields=("interfaceConfig",)),
    Collection.CLINICIANS_PATIENTS: TableMap(clinicians_patients, {
        "clinicianId": "clinician_id", "patientId": "patient_id"}, refs=("clinicianId", "patientId")),
    Collection.CATEGORIES: TableMap(categories, {
        "name": "name", "parentId": "parent_id"}, refs=("parentId",)),
    Collection.CONTENTS: TableMap(contents, {
        "name": "name", "mediaType": "media_type", "patient_description": "patient_description",
        "clinician_description": "clinician_description", "categoryId": "category_id", "path": "path",
        "creatorId": "creator_id"}, refs=("categoryId", "creatorId"), computed={"kind": "content_kind"}),
    Collection.GOALS: TableMap(goals, {
        "patientId": "patient_id", "description": "description", "term": "term"},
        refs=("patientId",), computed={"comments": "goal_comments"}),
    Collection.INFORMATION: TableMap(information, {
        "patientId": "patient_id", "title": "title", "body": "body"}, refs=("patientId",)),
    Collection.TREATMENTS: TableMap(treatments, {
        "patientId": "patient_id", "title": "title", "description": "description",
        "repetitionsPerDay": "repetitions_per_day"}, refs=("patientId",)),
    Collection.TREATMENT_CONTENT: TableMap(treatment_contents, {
        "treatmentId": "treatment_id", "informationId": "information_id", "contentId": "content_id"},
        refs=("treatmentId", "informationId", "contentId")),
}
