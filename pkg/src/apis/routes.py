"""
Route table for the eleven collections plus auth, status and goal comments.

Every collection gets the same five routes:

    GET    /api/<route>        list      (open when openReads is on)
    POST   /api/<route>        create    (requires login)
    GET    /api/<route>/{id}   read      (open when openReads is on)
    PUT    /api/<route>/{id}   update    (requires login)
    DELETE /api/<route>/{id}   delete    (requires login)

The item id is resolved to its record before the handler runs and the record
is left in request["record"].
"""
import asyncio
import functools
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Optional

from aiohttp import web

from apis.auth import SESSION_COOKIE, authenticate, hash_password, new_salt
from apis.context import (CONFIG, HASH_ITERATIONS, SESSIONS, STORE, ApiError, json_response, message_response,
                          read_json, store_call)
from apis.upload import upload_content
from model import (COLLECTION_SPECS, ID_FIELD, PROFILE_COLLECTIONS, SECRET_ACCOUNT_FIELDS, Collection, Role,
                   public_account, spec_for)
from storage import StoreError
from vre import get_version

ITEM = "{id}"


class Guard(str, Enum):
    READ = "read"  # open unless openReads is off
    LOGIN = "login"


ALL_ROLES = frozenset(Role)
STAFF = frozenset({Role.ADMINISTRATOR, Role.CLINICIAN})
ADMIN_ONLY = frozenset({Role.ADMINISTRATOR})

# who may mutate each collection
WRITE_ROLES = {
    Collection.ACCOUNTS: ADMIN_ONLY,
    Collection.ADMINISTRATORS: ADMIN_ONLY,
    Collection.CATEGORIES: ADMIN_ONLY,
    Collection.CLINICIANS: ADMIN_ONLY,
    Collection.PATIENTS: STAFF,
    Collection.CLINICIANS_PATIENTS: STAFF,
    Collection.CONTENTS: STAFF,
    Collection.GOALS: STAFF,
    Collection.INFORMATION: STAFF,
    Collection.TREATMENTS: STAFF,
    Collection.TREATMENT_CONTENT: STAFF,
}


@dataclass(frozen=True)
class Route:
    method: str
    path: str
    guard: Guard
    handler: object
    collection: Optional[Collection] = None


def requires_login(handler, guard: Guard = Guard.LOGIN, roles=ALL_ROLES):
    @functools.wraps(handler)
    async def guarded(request: web.Request):
        session = request.app[SESSIONS].lookup(request.cookies.get(SESSION_COOKIE))
        request["session"] = session
        if session is None and (guard is Guard.LOGIN or not request.app[CONFIG].open_reads):
            raise ApiError(401, "User is not logged in")
        if guard is Guard.LOGIN and session.role not in roles:
            raise ApiError(403, f"{session.role.value} accounts may not do this")
        return await handler(request)

    return guarded


def resolve_id(collection: Collection, handler):
    @functools.wraps(handler)
    async def resolved(request: web.Request):
        entity_id = request.match_info["id"]
        request["record"] = store_call(request, request.app[STORE].read, collection, entity_id)
        return await handler(request)

    return resolved


def _public(collection: Collection, doc: dict) -> dict:
    return public_account(doc) if collection is Collection.ACCOUNTS else doc


class CollectionHandlers:
    """The generic CRUD handlers of one collection; they delegate straight to the store."""

    def __init__(self, collection: Collection):
        self.collection = collection

    async def list(self, request):
        docs = store_call(request, request.app[STORE].list, self.collection)
        return json_response([_public(self.collection, d) for d in docs])

    async def create(self, request):
        body = await read_json(request)
        store = request.app[STORE]
        new_id = store_call(request, store.create, self.collection, body)
        return json_response(_public(self.collection, store_call(request, store.read, self.collection, new_id)))

    async def read(self, request):
        return json_response(_public(self.collection, request["record"]))

    async def update(self, request):
        body = await read_json(request)
        store = request.app[STORE]
        doc = store_call(request, store.update, self.collection, request["record"][ID_FIELD], body)
        return json_response(_public(self.collection, doc))

    async def delete(self, request):
        record = request["record"]
        store_call(request, request.app[STORE].delete, self.collection, record[ID_FIELD])
        return json_response(_public(self.collection, record))


class AccountHandlers(CollectionHandlers):
    """Accounts take a plaintext password, store only its hash and create the matching role profile."""

    def __init__(self):
        super().__init__(Collection.ACCOUNTS)

    @staticmethod
    async def _hashed(request, password) -> dict:
        if not isinstance(password, str) or not password:
            raise ApiError(400, "password must be a non-empty string")
        salt = new_salt()
        digest = await asyncio.to_thread(hash_password, password, salt, request.app[HASH_ITERATIONS])
        return {"salt": salt, "passwordHash": digest}

    async def create(self, request):
        body = await read_json(request)
        if any(k in body for k in SECRET_ACCOUNT_FIELDS):
            raise ApiError(400, "send a password, not a salt or hash")
        role = body.get("role")
        if role not in {r.value for r in Role}:
            raise ApiError(400, f"role must be one of {', '.join(r.value for r in Role)}")
        display_name = body.pop("displayName", None) or body.get("username")
        interface_config = body.pop("interfaceConfig", None)
        body.update(await self._hashed(request, body.pop("password", None)))

        store = request.app[STORE]
        account_id = store_call(request, store.create, Collection.ACCOUNTS, body)
        profile = {"accountId": account_id, "displayName": display_name}
        if role == Role.PATIENT.value:
            profile["interfaceConfig"] = interface_config or {}
        profile_collection = PROFILE_COLLECTIONS[Role(role)]
        try:
            profile_id = store_call(request, store.create, profile_collection, profile)
        except StoreError:
            store_call(request, store.delete, Collection.ACCOUNTS, account_id)
            raise
        doc = public_account(store_call(request, store.read, Collection.ACCOUNTS, account_id))
        doc["profileId"] = profile_id
        return json_response(doc)

    async def update(self, request):
        body = await read_json(request)
        if any(k in body for k in SECRET_ACCOUNT_FIELDS):
            raise ApiError(400, "send a password, not a salt or hash")
        if "password" in body:
            body.update(await self._hashed(request, body.pop("password")))
        store = request.app[STORE]
        doc = store_call(request, store.update, Collection.ACCOUNTS, request["record"][ID_FIELD], body)
        return json_response(public_account(doc))


class ContentHandlers(CollectionHandlers):
    def __init__(self):
        super().__init__(Collection.CONTENTS)

    async def create(self, request):
        return await upload_content(request)


class AssignmentHandlers(CollectionHandlers):
    """POST assigns repository content to a treatment or to an information record."""

    def __init__(self):
        super().__init__(Collection.TREATMENT_CONTENT)

    async def create(self, request):
        body = await read_json(request)
        store = request.app[STORE]
        owners = [(f, c) for f, c in (("treatmentId", Collection.TREATMENTS),
                                      ("informationId", Collection.INFORMATION)) if body.get(f) is not None]
        if len(owners) != 1 or not body.get("contentId"):
            raise ApiError(400, "assign needs contentId and exactly one of treatmentId, informationId")
        (owner_field, owner_collection), = owners
        for name, collection in ((owner_field, owner_collection), ("contentId", Collection.CONTENTS)):
            if store_call(request, store.get, collection, body[name]) is None:
                raise ApiError(404, f"{collection.value} {body[name]} not found")
        new_id = store_call(request, store.create, self.collection, body)
        return json_response(store_call(request, store.read, self.collection, new_id))


HANDLERS = {
    Collection.ACCOUNTS: AccountHandlers,
    Collection.CONTENTS: ContentHandlers,
    Collection.TREATMENT_CONTENT: AssignmentHandlers,
}


def build_route_table() -> list:
    routes = []
    for collection, spec in COLLECTION_SPECS.items():
        handler_cls = HANDLERS.get(collection)
        handlers = handler_cls() if handler_cls is not None else CollectionHandlers(collection)
        root, item = f"/api/{spec.route}", f"/api/{spec.route}/{ITEM}"
        routes += [
            Route("GET", root, Guard.READ, handlers.list, collection),
            Route("POST", root, Guard.LOGIN, handlers.create, collection),
            Route("GET", item, Guard.READ, resolve_id(collection, handlers.read), collection),
            Route("PUT", item, Guard.LOGIN, resolve_id(collection, handlers.update), collection),
            Route("DELETE", item, Guard.LOGIN, resolve_id(collection, handlers.delete), collection),
        ]
    return routes


def route_defs(table: list) -> list:
    defs = []
    for r in table:
        roles = WRITE_ROLES[r.collection] if r.collection is not None else ALL_ROLES
        defs.append(web.route(r.method, r.path, requires_login(r.handler, r.guard, roles)))
    return defs


# --- auth, status, comments ---

async def login(request: web.Request) -> web.Response:
    body = await read_json(request)
    username, password = body.get("username"), body.get("password")
    for name, value in (("username", username), ("password", password)):
        if value is not None and not isinstance(value, str):
            raise ApiError(400, f"{name} must be a string")
    account = await authenticate(request.app[STORE], username, password,
                                 request.app[HASH_ITERATIONS])
    cookie = request.app[SESSIONS].issue(account)
    response = json_response({"_id": account[ID_FIELD], "username": account["username"],
                              "role": account["role"]})
    response.set_cookie(SESSION_COOKIE, cookie, httponly=True, samesite="Lax")
    return response


async def logout(request: web.Request) -> web.Response:
    request.app[SESSIONS].revoke(request.cookies.get(SESSION_COOKIE))
    response = message_response(200, "Logged out")
    response.del_cookie(SESSION_COOKIE)
    return response


async def status(request: web.Request) -> web.Response:
    store = request.app[STORE]
    counts = {c.value: store_call(request, store.count, c) for c in (Collection.PATIENTS, Collection.CONTENTS,
                                                                      Collection.CLINICIANS)}
    return json_response({
        "status": "ok",
        "version": get_version(),
        "backend": store.kind.value,
        "revision": store.revision,
        "counts": counts,
    })


async def add_goal_comment(request: web.Request) -> web.Response:
    """Any logged-in user (patients included) may comment on a goal's progress."""
    body = await read_json(request)
    text = body.get("text")
    if not isinstance(text, str) or not text.strip():
        raise ApiError(400, "comment text must not be empty")
    goal = request["record"]
    comment = {"authorId": request["session"].account_id, "text": text,
               "timestamp": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")}
    comments = list(goal.get("comments") or []) + [comment]
    doc = store_call(request, request.app[STORE].update, Collection.GOALS, goal[ID_FIELD], {"comments": comments})
    return json_response(doc)


def extra_route_defs() -> list:
    goal_item = f"/api/{spec_for(Collection.GOALS).route}/{ITEM}/comment"
    return [
        web.post("/api/auth/login", login),
        web.post("/api/auth/logout", logout),
        web.get("/api/status", status),
        web.post(goal_item, requires_login(resolve_id(Collection.GOALS, add_goal_comment))),
    ]
