import time
from typing import Any

import orjson
from aiohttp import web

from apis.auth import SessionTable
from apis.shell import ShellBundle
from storage import StoreContract
from vre.config import ServerConfig
from vre.errors import VreError

STORE = web.AppKey("store", StoreContract)
SESSIONS = web.AppKey("sessions", SessionTable)
CONFIG = web.AppKey("config", ServerConfig)
SHELL = web.AppKey("shell", ShellBundle)
HASH_ITERATIONS = web.AppKey("hash_iterations", int)


class ApiError(VreError):
    """An error raised by a handler with the HTTP status it should produce."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _dumps(data: Any) -> str:
    return orjson.dumps(data).decode("utf-8")


def json_response(data: Any, status: int = 200) -> web.Response:
    return web.json_response(data, status=status, dumps=_dumps)


def message_response(status: int, message: str) -> web.Response:
    return json_response({"message": message}, status=status)


async def read_json(request: web.Request) -> dict:
    raw = await request.read()
    if not raw:
        return {}
    try:
        body = orjson.loads(raw)
    except orjson.JSONDecodeError:
        raise ApiError(400, "malformed JSON body")
    if not isinstance(body, dict):
        raise ApiError(400, "body must be a flat document")
    return body


def store_call(request: web.Request, fn, *args):
    """Runs one store operation and adds its duration to the request's store time."""
    started = time.perf_counter()
    try:
        return fn(*args)
    finally:
        request["store_ms"] = request.get("store_ms", 0.0) + (time.perf_counter() - started) * 1000
