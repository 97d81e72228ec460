import pytest

from model import (BackendKind, Collection, ContentKind, Goal, GoalComment, InformationContentLink, Patient, Role,
                   Term, TreatmentContentLink, entity_from_doc, public_account, with_defaults)
from model.ids import IdAllocator, is_valid_id, new_entity_id
from model.validate import validate_entity, validate_store


def test_document_ids_are_24_hex():
    ids = {IdAllocator(BackendKind.DOCUMENT).next() for _ in range(50)}
    assert len(ids) == 50
    assert all(is_valid_id(BackendKind.DOCUMENT, i) for i in ids)


def test_normalized_ids_count_up():
    alloc = IdAllocator(BackendKind.NORMALIZED, start=7)
    assert [alloc.next() for _ in range(3)] == ["7", "8", "9"]
    assert not is_valid_id(BackendKind.NORMALIZED, "0")
    assert not is_valid_id(BackendKind.NORMALIZED, "a1")


def test_new_entity_id():
    assert new_entity_id(BackendKind.NORMALIZED) == "1"
    assert is_valid_id(BackendKind.DOCUMENT, new_entity_id(BackendKind.DOCUMENT))
    alloc = IdAllocator(BackendKind.NORMALIZED, start=41)
    assert new_entity_id(BackendKind.NORMALIZED, alloc) == "41"


def test_goal_defaults_to_short_term():
    doc = with_defaults(Collection.GOALS, {"patientId": "p", "description": "walk"})
    assert doc["term"] == Term.SHORT.value
    assert doc["comments"] == []


def test_entity_doc_round_trip_keeps_wire_names():
    goal = Goal("p1", "walk 10m", Term.LONG, (GoalComment("a1", "better", "2015-03-01T10:00:00Z"),), id="g1")
    doc = goal.to_doc()
    assert doc["_id"] == "g1"
    assert doc["patientId"] == "p1"
    assert doc["comments"][0]["authorId"] == "a1"
    assert Goal.from_doc(doc) == goal


def test_content_descriptions_keep_snake_case():
    from model import Content
    doc = Content("clip", "c1", "repository/x.mp4", "a1", patient_description="watch").to_doc()
    assert "patient_description" in doc
    assert "clinician_description" in doc
    assert doc["categoryId"] == "c1"


def test_link_rows_pick_their_variant():
    assert isinstance(entity_from_doc(Collection.TREATMENT_CONTENT,
                                      {"treatmentId": "t", "informationId": None, "contentId": "c"}),
                      TreatmentContentLink)
    assert isinstance(entity_from_doc(Collection.TREATMENT_CONTENT,
                                      {"treatmentId": None, "informationId": "i", "contentId": "c"}),
                      InformationContentLink)


def test_public_account_hides_secrets():
    doc = public_account({"_id": "1", "username": "u", "salt": "s", "passwordHash": "h", "role": "Patient"})
    assert doc == {"_id": "1", "username": "u", "role": "Patient"}


def test_content_kind_from_media_type():
    assert ContentKind.from_media_type("video/mp4") is ContentKind.VIDEO
    assert ContentKind.from_media_type("application/pdf") is ContentKind.OTHER


class TestValidation:
    def _patient(self, store):
        account = store.create(Collection.ACCOUNTS, {"username": "pat", "salt": "s", "passwordHash": "h",
                                                     "role": Role.PATIENT.value})
        return store.create(Collection.PATIENTS, Patient(account, "Pat"))

    def test_valid_goal(self, document_store):
        patient = self._patient(document_store)
        assert validate_entity(Goal(patient, "walk"), document_store) == []

    def test_dangling_reference(self, document_store):
        codes = {v.code for v in validate_entity(Goal("f" * 24, "walk"), document_store)}
        assert codes == {"dangling"}

    def test_empty_required_field(self, document_store):
        patient = self._patient(document_store)
        violations = validate_entity({"patientId": patient, "description": ""}, document_store,
                                     collection=Collection.GOALS)
        assert [v.field for v in violations] == ["description"]

    def test_profile_must_reference_matching_role(self, document_store):
        account = document_store.create(Collection.ACCOUNTS, {"username": "doc", "salt": "s", "passwordHash": "h",
                                                              "role": Role.CLINICIAN.value})
        violations = validate_entity(Patient(account, "Not a patient"), document_store)
        assert [v.code for v in violations] == ["role"]

    def test_link_needs_exactly_one_owner(self, document_store):
        violations = validate_entity({"treatmentId": None, "informationId": None, "contentId": None},
                                     document_store, collection=Collection.TREATMENT_CONTENT)
        assert "link" in {v.code for v in violations}

    def test_duplicate_username(self, document_store):
        self._patient(document_store)
        doc = {"username": "pat", "salt": "s", "passwordHash": "h", "role": Role.PATIENT.value}
        assert [v.code for v in validate_entity(doc, document_store, collection=Collection.ACCOUNTS)] == \
               ["duplicate"]

    def test_category_cycle(self, document_store):
        root = document_store.create(Collection.CATEGORIES, {"name": "root"})
        child = document_store.create(Collection.CATEGORIES, {"name": "child", "parentId": root})
        doc = {"_id": root, "name": "root", "parentId": child}
        assert "cycle" in {v.code for v in validate_entity(doc, document_store, collection=Collection.CATEGORIES)}

    def test_raw_document_needs_collection(self, document_store):
        with pytest.raises(ValueError):
            validate_entity({"name": "x"}, document_store)

    def test_seeded_store_is_valid(self, seeded_store):
        assert validate_store(seeded_store) == {}

    def test_orphan_after_delete_is_reported(self, document_store):
        patient = self._patient(document_store)
        goal = document_store.create(Collection.GOALS, Goal(patient, "walk"))
        document_store.delete(Collection.PATIENTS, patient)
        report = validate_store(document_store)
        assert (Collection.GOALS.value, goal) in report
