from pathlib import Path

import pytest

from apis import ApiServer, create_app
from storage import WriteConcern
from storage.document import DocumentStore
from storage.normalized import NormalizedStore
from vre.config import ServerConfig
from vre.seed import ADMIN_PASSWORD, ADMIN_USERNAME, SeedProfile, seed_store

FIXTURES = Path(__file__).parent / "fixtures"

# hashing strength is not under test outside test_auth
FAST_HASH = 10
SMALL_SHELL = 12_000
SMALL_PROFILE = SeedProfile(clinicians=10, patients=20, contents=20)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def document_store(tmp_path):
    store = DocumentStore(tmp_path / "document")
    yield store
    store.close()


@pytest.fixture
def normalized_store(tmp_path):
    store = NormalizedStore(tmp_path / "normalized")
    yield store
    store.close()


@pytest.fixture(params=["document", "normalized"])
def any_store(request, document_store, normalized_store):
    return document_store if request.param == "document" else normalized_store


@pytest.fixture
def unjournaled_store(tmp_path):
    store = DocumentStore(tmp_path / "unjournaled",
                          write_concern=WriteConcern.from_name("unjournaled", flush_interval_ms=60_000))
    yield store
    store.close()


@pytest.fixture
def server_config(tmp_path) -> ServerConfig:
    return ServerConfig(data_dir=tmp_path, shell_bytes=SMALL_SHELL, port=0, session_secret="test-secret")


@pytest.fixture
def seeded_store(document_store):
    seed_store(document_store, SMALL_PROFILE, hash_iterations=FAST_HASH)
    return document_store


@pytest.fixture(params=["document", "normalized"])
def api_store(request, document_store, normalized_store):
    """The seeded store behind the HTTP tests; every route is exercised on both backends."""
    store = document_store if request.param == "document" else normalized_store
    seed_store(store, SMALL_PROFILE, hash_iterations=FAST_HASH)
    return store


@pytest.fixture
async def client(aiohttp_client, server_config, api_store):
    app = create_app(server_config, api_store, hash_iterations=FAST_HASH)
    return await aiohttp_client(app)


@pytest.fixture
async def admin_client(client):
    resp = await client.post("/api/auth/login", json={"username": ADMIN_USERNAME, "password": ADMIN_PASSWORD})
    assert resp.status == 200
    return client


@pytest.fixture
async def live_server(server_config, seeded_store):
    server = ApiServer(server_config, seeded_store, hash_iterations=FAST_HASH)
    await server.start()
    yield server
    await server.close()
