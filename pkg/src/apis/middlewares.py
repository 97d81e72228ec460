import time

from aiohttp import web
from aiohttp.abc import AbstractAccessLogger

from apis.auth import AuthFailed, MalformedStoredField
from apis.context import ApiError, message_response
from storage import DuplicateKey, NotFound, ReferentialViolation, SchemaViolation, StoreClosed
from vre.errors import VreError
from vre.logs import format_access_line, get_logger

logger = get_logger(__name__)

ERROR_STATUS = {
    NotFound: 404,
    ReferentialViolation: 409,
    DuplicateKey: 409,
    SchemaViolation: 400,
    StoreClosed: 503,
    AuthFailed: 401,
    MalformedStoredField: 401,
}


def status_for(ex: VreError) -> int:
    if isinstance(ex, ApiError):
        return ex.status
    for cls in type(ex).__mro__:
        if cls in ERROR_STATUS:
            return ERROR_STATUS[cls]
    return 500


@web.middleware
async def error_middleware(request: web.Request, handler):
    try:
        return await handler(request)
    except VreError as ex:
        status = status_for(ex)
        if status >= 500:
            logger.error(f"{request.method} {request.path}: {ex}")
        return message_response(status, str(ex))
    except web.HTTPException as ex:
        if ex.status < 400:
            raise
        return message_response(ex.status, ex.reason)


def server_timing(store_ms: float, app_ms: float) -> str:
    # fixed-width durations keep response sizes identical from run to run
    return f"store;dur={store_ms:09.3f}, app;dur={app_ms:09.3f}"


@web.middleware
async def timing_middleware(request: web.Request, handler):
    started = time.perf_counter()
    response = await handler(request)
    app_ms = (time.perf_counter() - started) * 1000
    response.headers["Server-Timing"] = server_timing(request.get("store_ms", 0.0), app_ms)
    return response


class AccessLogger(AbstractAccessLogger):
    """One line per request: '<METHOD> <path> <status> <elapsed> ms - <bytes>'."""

    def log(self, request, response, time):
        self.logger.info(format_access_line(request.method, request.path, response.status, time * 1000,
                                            response.body_length))
