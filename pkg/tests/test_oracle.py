from model import Collection
from storage.oracle import (CONSEQUENCE, EXPECTED, Op, Ref, canonical_dump, dangling_insert_ops, dump_divergences,
                            equivalence_oracle, random_valid_ops)
from vre.seed import SeedProfile, seed_store

PROFILE = SeedProfile(clinicians=3, patients=5, contents=6)


def test_random_ops_are_deterministic():
    assert random_valid_ops(7, 200) == random_valid_ops(7, 200)
    assert len(random_valid_ops(7, 200)) == 200


def test_thousand_valid_ops_do_not_diverge(tmp_path):
    verdict = equivalence_oracle(random_valid_ops(2015, 1000), data_root=tmp_path)
    assert verdict.operations == 1000
    assert verdict.identical, verdict.divergences[:3]


def test_dangling_insert_is_the_documented_divergence(tmp_path):
    verdict = equivalence_oracle(dangling_insert_ops(), data_root=tmp_path)
    assert verdict.ok
    assert [d.classification for d in verdict.divergences] == [EXPECTED, CONSEQUENCE]
    first = verdict.divergences[0]
    assert first.normalized == ("error", "ReferentialViolation")
    assert first.document[0] == "ok"


def test_ops_name_records_by_ordinal(tmp_path):
    ops = [
        Op("create", Collection.CATEGORIES, {"name": "Arm"}),
        Op("create", Collection.CATEGORIES, {"name": "Wrist", "parentId": Ref(0)}),
        Op("read", Collection.CATEGORIES, target=1),
        Op("query", Collection.CATEGORIES, {"parentId": Ref(0)}),
    ]
    verdict = equivalence_oracle(ops, data_root=tmp_path)
    assert verdict.identical


def test_seeded_backends_dump_the_same(document_store, normalized_store):
    seed_store(document_store, PROFILE, hash_iterations=1)
    seed_store(normalized_store, PROFILE, hash_iterations=1)
    assert dump_divergences(document_store, normalized_store) == []
    dump = canonical_dump(normalized_store)
    assert dump[Collection.PATIENTS.value][0]["_id"] == "#0"
