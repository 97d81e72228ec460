import random

import pytest

from model import Collection, Role
from storage import (DuplicateKey, NotFound, ReferentialViolation, SchemaViolation, StoreClosed, WriteConcern,
                     WriteMode, open_store)
from storage.document import JOURNAL_NAME, DocumentStore
from storage.normalized import NormalizedStore


def _account(store, username="pat", role=Role.PATIENT):
    return store.create(Collection.ACCOUNTS, {"username": username, "salt": "s", "passwordHash": "h",
                                              "role": role.value})


def _patient(store, username="pat"):
    return store.create(Collection.PATIENTS, {"accountId": _account(store, username), "displayName": username})


class TestContract:
    def test_create_read_update_delete(self, any_store):
        patient = _patient(any_store)
        goal = any_store.create(Collection.GOALS, {"patientId": patient, "description": "walk"})
        assert any_store.read(Collection.GOALS, goal)["term"] == "Short"

        updated = any_store.update(Collection.GOALS, goal, {"term": "Long"})
        assert updated["term"] == "Long"
        assert updated["description"] == "walk"

        any_store.delete(Collection.GOALS, goal)
        assert not any_store.exists(Collection.GOALS, goal)
        with pytest.raises(NotFound):
            any_store.read(Collection.GOALS, goal)

    def test_list_is_in_insertion_order(self, any_store):
        ids = [any_store.create(Collection.CATEGORIES, {"name": f"c{i}"}) for i in range(5)]
        assert [d["_id"] for d in any_store.list(Collection.CATEGORIES)] == ids
        assert any_store.count(Collection.CATEGORIES) == 5

    def test_query_by_field(self, any_store):
        a, b = _patient(any_store, "a"), _patient(any_store, "b")
        for patient, n in ((a, 3), (b, 2)):
            for i in range(n):
                any_store.create(Collection.GOALS, {"patientId": patient, "description": f"g{i}"})
        assert len(any_store.query(Collection.GOALS, {"patientId": b})) == 2

    def test_missing_required_field(self, any_store):
        with pytest.raises(SchemaViolation):
            any_store.create(Collection.CATEGORIES, {"name": ""})

    def test_duplicate_username(self, any_store):
        _account(any_store, "same")
        with pytest.raises(DuplicateKey):
            _account(any_store, "same")

    def test_update_missing_record(self, any_store):
        with pytest.raises(NotFound):
            any_store.update(Collection.CATEGORIES, "123", {"name": "x"})

    def test_goal_comments_survive(self, any_store):
        patient = _patient(any_store)
        comments = [{"authorId": "1", "text": "feeling better", "timestamp": "2015-03-01T10:00:00Z"}]
        goal = any_store.create(Collection.GOALS, {"patientId": patient, "description": "walk",
                                                   "comments": comments})
        assert any_store.read(Collection.GOALS, goal)["comments"] == comments

    def test_closed_store_refuses(self, any_store):
        any_store.close()
        with pytest.raises(StoreClosed):
            any_store.list(Collection.GOALS)

    def test_revision_counts_writes(self, any_store):
        before = any_store.revision
        _patient(any_store)
        assert any_store.revision == before + 2

    def test_empty_patch_changes_nothing(self, any_store):
        patient = _patient(any_store)
        goal = any_store.create(Collection.GOALS, {"patientId": patient, "description": "walk"})
        before, revision = any_store.read(Collection.GOALS, goal), any_store.revision
        assert any_store.update(Collection.GOALS, goal, {}) == before
        assert any_store.update(Collection.GOALS, goal, {"_id": "ignored"}) == before
        assert any_store.revision == revision

    def test_novel_field(self, any_store):
        patient = _patient(any_store)
        goal = any_store.create(Collection.GOALS, {"patientId": patient, "description": "walk"})
        if isinstance(any_store, NormalizedStore):
            with pytest.raises(SchemaViolation):
                any_store.update(Collection.GOALS, goal, {"priority": "high"})
            assert "priority" not in any_store.read(Collection.GOALS, goal)
        else:
            any_store.update(Collection.GOALS, goal, {"priority": "high"})
            assert any_store.read(Collection.GOALS, goal)["priority"] == "high"


class TestReferentialBehaviour:
    def test_normalized_rejects_dangling_reference(self, normalized_store):
        with pytest.raises(ReferentialViolation):
            normalized_store.create(Collection.GOALS, {"patientId": "999", "description": "walk"})

    def test_document_accepts_dangling_reference(self, document_store):
        goal = document_store.create(Collection.GOALS, {"patientId": "f" * 24, "description": "walk"})
        assert document_store.exists(Collection.GOALS, goal)

    def test_normalized_refuses_deleting_referenced_record(self, normalized_store):
        patient = _patient(normalized_store)
        normalized_store.create(Collection.GOALS, {"patientId": patient, "description": "walk"})
        with pytest.raises(ReferentialViolation):
            normalized_store.delete(Collection.PATIENTS, patient)

    def test_document_delete_leaves_orphans(self, document_store):
        patient = _patient(document_store)
        goal = document_store.create(Collection.GOALS, {"patientId": patient, "description": "walk"})
        document_store.delete(Collection.PATIENTS, patient)
        assert document_store.read(Collection.GOALS, goal)["patientId"] == patient

    def test_normalized_rejects_unknown_field(self, normalized_store):
        with pytest.raises(SchemaViolation):
            normalized_store.create(Collection.CATEGORIES, {"name": "x", "colour": "red"})

    def test_normalized_keeps_content_kind_in_child_table(self, normalized_store):
        account = _account(normalized_store, "admin", Role.ADMINISTRATOR)
        category = normalized_store.create(Collection.CATEGORIES, {"name": "Arm"})
        content = normalized_store.create(Collection.CONTENTS, {
            "name": "clip", "mediaType": "video/mp4", "kind": "Video", "categoryId": category,
            "path": "repository/clip.mp4", "creatorId": account})
        assert normalized_store.read(Collection.CONTENTS, content)["kind"] == "Video"
        updated = normalized_store.update(Collection.CONTENTS, content, {"kind": "Audio"})
        assert updated["kind"] == "Audio"

    def test_normalized_ids_resume_after_reopen(self, tmp_path):
        store = NormalizedStore(tmp_path / "n")
        first = store.create(Collection.CATEGORIES, {"name": "a"})
        store.close()
        store = NormalizedStore(tmp_path / "n")
        second = store.create(Collection.CATEGORIES, {"name": "b"})
        store.close()
        assert int(second) == int(first) + 1


class TestJournal:
    def test_replay_rebuilds_collections(self, tmp_path):
        store = DocumentStore(tmp_path)
        patient = _patient(store)
        goal = store.create(Collection.GOALS, {"patientId": patient, "description": "walk"})
        store.update(Collection.GOALS, goal, {"term": "Long"})
        store.close()

        reopened = DocumentStore(tmp_path)
        assert reopened.read(Collection.GOALS, goal)["term"] == "Long"
        assert reopened.count(Collection.ACCOUNTS) == 1
        reopened.close()

    def test_torn_tail_frame_is_dropped(self, tmp_path):
        store = DocumentStore(tmp_path)
        kept = store.create(Collection.CATEGORIES, {"name": "kept"})
        store.close()
        with open(tmp_path / JOURNAL_NAME, "ab") as fh:
            fh.write(b"\x00\x00\x01\x00{\"c\":")

        reopened = DocumentStore(tmp_path)
        assert [d["_id"] for d in reopened.list(Collection.CATEGORIES)] == [kept]
        reopened.close()

    def test_writes_after_torn_tail_survive(self, tmp_path):
        store = DocumentStore(tmp_path)
        kept = store.create(Collection.CATEGORIES, {"name": "kept"})
        store.close()
        journal = tmp_path / JOURNAL_NAME
        good_size = journal.stat().st_size
        with open(journal, "ab") as fh:
            fh.write(b"\x00\x00\x01\x00{\"c\":")

        recovered = DocumentStore(tmp_path)
        assert journal.stat().st_size == good_size
        after = recovered.create(Collection.CATEGORIES, {"name": "after recovery"})
        recovered.close()

        reopened = DocumentStore(tmp_path)
        assert [d["_id"] for d in reopened.list(Collection.CATEGORIES)] == [kept, after]
        reopened.close()

    def test_short_trailing_bytes_are_cut(self, tmp_path):
        store = DocumentStore(tmp_path)
        store.create(Collection.CATEGORIES, {"name": "kept"})
        store.close()
        with open(tmp_path / JOURNAL_NAME, "ab") as fh:
            fh.write(b"\x00\x00")

        recovered = DocumentStore(tmp_path)
        recovered.create(Collection.CATEGORIES, {"name": "next"})
        recovered.close()
        reopened = DocumentStore(tmp_path)
        assert reopened.count(Collection.CATEGORIES) == 2
        reopened.close()

    def test_open_store_picks_engine(self, tmp_path):
        store = open_store("normalized", tmp_path / "n")
        assert isinstance(store, NormalizedStore)
        store.close()


class TestWriteConcern:
    def test_from_name(self):
        assert WriteConcern.from_name("journaled").mode is WriteMode.JOURNALED
        assert WriteConcern.from_name("unjournaled").mode is WriteMode.ACKNOWLEDGED_UNJOURNALED
        with pytest.raises(ValueError):
            WriteConcern(flush_interval_ms=0)

    def test_unjournaled_crash_loses_acknowledged_writes(self, unjournaled_store):
        ids = [unjournaled_store.create(Collection.CATEGORIES, {"name": f"c{i}"}) for i in range(10)]
        assert unjournaled_store.staged_count == 10
        lost = unjournaled_store.crash()
        assert lost == 10
        assert not any(unjournaled_store.exists(Collection.CATEGORIES, i) for i in ids)

    def test_unjournaled_flush_makes_writes_durable(self, unjournaled_store):
        kept = unjournaled_store.create(Collection.CATEGORIES, {"name": "kept"})
        assert unjournaled_store.flush() == 1
        gone = unjournaled_store.create(Collection.CATEGORIES, {"name": "gone"})
        unjournaled_store.crash()
        assert unjournaled_store.exists(Collection.CATEGORIES, kept)
        assert not unjournaled_store.exists(Collection.CATEGORIES, gone)

    async def test_background_flusher_drains_the_stage(self, tmp_path):
        store = DocumentStore(tmp_path, write_concern=WriteConcern.from_name("unjournaled", flush_interval_ms=10))
        await store.start()
        store.create(Collection.CATEGORIES, {"name": "a"})
        await store.stop()
        assert store.staged_count == 0
        store.crash()
        assert store.count(Collection.CATEGORIES) == 1
        store.close()

    def test_journaled_never_loses_an_acknowledged_write(self, tmp_path):
        rng = random.Random(2015)
        store = DocumentStore(tmp_path)
        acknowledged = set()
        for point in range(100):
            for i in range(rng.randint(0, 5)):
                acknowledged.add(store.create(Collection.CATEGORIES, {"name": f"p{point}-{i}"}))
            if acknowledged and rng.random() < 0.3:
                victim = rng.choice(sorted(acknowledged))
                store.delete(Collection.CATEGORIES, victim)
                acknowledged.discard(victim)
            assert store.crash() == 0
            assert {d["_id"] for d in store.list(Collection.CATEGORIES)} == acknowledged
        store.close()
