"""Multipart upload into the content repository: POST /api/repository."""
import secrets
from pathlib import Path

import orjson
from aiohttp import web

from apis.context import CONFIG, STORE, ApiError, json_response, store_call
from model import Collection, ContentKind
from storage import StoreError

CHUNK_SIZE = 256 * 1024
TOKEN_BYTES = 16  # 32 hex characters


def stored_name(original: str) -> str:
    return secrets.token_hex(TOKEN_BYTES) + Path(original or "").suffix


def _metadata(fields: dict) -> dict:
    """Accepts either a JSON `data` part or the form fields name, pat_desc, clin_desc, category."""
    if "data" in fields:
        try:
            data = orjson.loads(fields["data"])
        except orjson.JSONDecodeError:
            raise ApiError(400, "data part is not valid JSON")
        if not isinstance(data, dict):
            raise ApiError(400, "data part must be a flat document")
        fields = {**fields, **{k: v for k, v in data.items() if v is not None}}
    name = fields.get("name")
    category = fields.get("categoryId") or fields.get("category")
    if not name or not category:
        raise ApiError(400, "upload needs name and category metadata")
    return {
        "name": name,
        "categoryId": category,
        "patient_description": fields.get("patient_description") or fields.get("pat_desc") or "",
        "clinician_description": fields.get("clinician_description") or fields.get("clin_desc") or "",
    }


async def upload_content(request: web.Request) -> web.Response:
    if not request.content_type.startswith("multipart/"):
        raise ApiError(400, "repository items are created with a multipart upload")
    config = request.app[CONFIG]
    store = request.app[STORE]
    session = request["session"]

    fields: dict = {}
    target = None
    media_type = None
    reader = await request.multipart()
    try:
        async for part in reader:
            if part.name == "file" and part.filename is not None and target is None:
                media_type = part.headers.get("Content-Type") or "application/octet-stream"
                target = config.repository_dir / stored_name(part.filename)
                try:
                    target.parent.mkdir(parents=True, exist_ok=True)
                    with open(target, "wb") as fh:
                        while True:
                            chunk = await part.read_chunk(CHUNK_SIZE)
                            if not chunk:
                                break
                            fh.write(chunk)
                except OSError as ex:
                    raise ApiError(507, f"content root is not writable: {ex.strerror}")
            elif part.name:
                fields[part.name] = await part.text()

        if target is None:
            raise ApiError(400, "upload needs a file part")
        doc = _metadata(fields)
        if store_call(request, store.get, Collection.CATEGORIES, doc["categoryId"]) is None:
            raise ApiError(400, f"unknown category {doc['categoryId']}")

        if config.content_root_is_url:
            path = f"{config.content_root}/{target.name}"
        else:
            path = str(Path(config.content_root) / target.name)
        doc.update({
            "mediaType": media_type,
            "kind": ContentKind.from_media_type(media_type).value,
            "path": path,
            "creatorId": session.account_id,
        })
        content_id = store_call(request, store.create, Collection.CONTENTS, doc)
    except (ApiError, StoreError):
        if target is not None:
            target.unlink(missing_ok=True)
        raise
    return json_response(store_call(request, store.read, Collection.CONTENTS, content_id))
