from pathlib import Path

import pytest

from model import Collection
from model.validate import validate_store
from storage.document import DocumentStore
from vre.config import ServerConfig, load_config, parse_kv_lines, with_port
from vre.errors import BadConfig, DirNotEmpty
from vre.seed import SeedProfile, clinician_username, prepare_data_dir, seed_store


def test_kv_lines_skip_comments():
    values = parse_kv_lines("# header\nport = 4000   # trailing\n\nopenReads=false\n")
    assert values == {"port": "4000", "openReads": "false"}


def test_kv_line_without_equals():
    with pytest.raises(BadConfig):
        parse_kv_lines("port 4000", source="vre.conf")


def test_defaults():
    config = load_config(environ={})
    assert config.backend == "document"
    assert config.port == 3333
    assert config.content_root == str(Path("data") / "repository")


def test_precedence_flag_over_env_over_file(tmp_path):
    path = tmp_path / "vre.conf"
    path.write_text("db = normalized:/srv/vre\nport = 4000\nsessionSecret = fromfile\n")
    config = load_config(path, environ={"VRE_PORT": "5000"}, overrides={"port": "6000"})
    assert config.port == 6000
    assert config.backend == "normalized"
    assert config.data_dir == Path("/srv/vre")
    assert config.session_secret == "fromfile"

    config = load_config(path, environ={"VRE_PORT": "5000"})
    assert config.port == 5000


@pytest.mark.parametrize("text", [
    "db = mysql:/tmp/x",
    "db = document",
    "port = -1",
    "openReads = maybe",
    "writeConcern = sometimes",
    "flushIntervalMs = 0",
    "colour = blue",
])
def test_bad_values(tmp_path, text):
    path = tmp_path / "vre.conf"
    path.write_text(text + "\n")
    with pytest.raises(BadConfig):
        load_config(path, environ={})


def test_missing_file(tmp_path):
    with pytest.raises(BadConfig):
        load_config(tmp_path / "absent.conf", environ={})


def test_cdn_content_root(tmp_path):
    config = load_config(environ={"VRE_GLOBAL_REPOSITORY": "https://cdn.example.org/vre/",
                                  "VRE_DB": f"document:{tmp_path}"})
    assert config.content_root == "https://cdn.example.org/vre"
    assert config.content_root_is_url
    assert config.repository_dir == tmp_path / "repository"


def test_with_port():
    assert with_port(ServerConfig(), 0).port == 0


class TestSeed:
    def test_counts(self, any_store):
        profile = SeedProfile(clinicians=3, patients=4, contents=5)
        summary = seed_store(any_store, profile, hash_iterations=1)
        assert summary.counts[Collection.CLINICIANS.value] == 3
        assert summary.counts[Collection.PATIENTS.value] == 4
        assert summary.counts[Collection.CONTENTS.value] == 5
        assert summary.counts[Collection.ACCOUNTS.value] == 1 + 3 + 4
        assert summary.counts[Collection.CLINICIANS_PATIENTS.value] == 4
        assert summary.counts[Collection.TREATMENT_CONTENT.value] == 4

    def test_deterministic(self):
        dumps = []
        for _ in range(2):
            store = DocumentStore()
            seed_store(store, SeedProfile(clinicians=1, patients=2, contents=2), hash_iterations=1)
            dumps.append([doc["passwordHash"] for doc in store.list(Collection.ACCOUNTS)])
            store.close()
        assert dumps[0] == dumps[1]

    def test_content_paths_use_root(self, document_store):
        seed_store(document_store, SeedProfile(clinicians=1, patients=1, contents=3),
                   content_root="https://cdn.example.org/vre/", hash_iterations=1)
        paths = [d["path"] for d in document_store.list(Collection.CONTENTS)]
        assert all(p.startswith("https://cdn.example.org/vre/") for p in paths)
        assert len(set(paths)) == 3

    def test_clinician_owns_content_without_admins(self, any_store):
        seed_store(any_store, SeedProfile(admins=0, clinicians=2, patients=1, contents=3), hash_iterations=1)
        first = any_store.query(Collection.ACCOUNTS, {"username": clinician_username(1)})[0]["_id"]
        assert [d["creatorId"] for d in any_store.list(Collection.CONTENTS)] == [first] * 3
        assert validate_store(any_store) == {}

    def test_content_needs_an_owner(self, document_store):
        with pytest.raises(BadConfig):
            seed_store(document_store, SeedProfile(admins=0, clinicians=0, patients=1, contents=1),
                       hash_iterations=1)
        assert document_store.count(Collection.ACCOUNTS) == 0

    def test_prepare_refuses_non_empty_dir(self, tmp_path):
        (tmp_path / "keep.txt").write_text("x")
        with pytest.raises(DirNotEmpty):
            prepare_data_dir(tmp_path)
        prepare_data_dir(tmp_path, force=True)
        assert list(tmp_path.iterdir()) == []
