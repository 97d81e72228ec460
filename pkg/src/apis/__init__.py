import errno
import logging
from typing import Optional

from aiohttp import web

from apis.auth import PBKDF2_ITERATIONS, SessionTable
from apis.context import CONFIG, HASH_ITERATIONS, SESSIONS, SHELL, STORE
from apis.middlewares import AccessLogger, error_middleware, timing_middleware
from apis.routes import build_route_table, extra_route_defs, route_defs
from apis.shell import ShellBundle
from storage import StoreContract, WriteConcern, open_store
from storage.document import DocumentStore
from vre.config import ServerConfig
from vre.errors import PortInUse
from vre.logs import ACCESS_LOGGER_NAME, get_logger

logger = get_logger(__name__)


def open_configured_store(config: ServerConfig) -> StoreContract:
    concern = WriteConcern.from_name(config.write_concern, config.flush_interval_ms)
    return open_store(config.backend, config.data_dir / config.backend, concern)


def create_app(config: ServerConfig, store: Optional[StoreContract] = None,
               hash_iterations: int = PBKDF2_ITERATIONS) -> web.Application:
    """Builds the VRE application; a store passed in stays owned by the caller."""
    owns_store = store is None
    if store is None:
        store = open_configured_store(config)

    app = web.Application(middlewares=[timing_middleware, error_middleware], client_max_size=1024 ** 3)
    app[CONFIG] = config
    app[STORE] = store
    app[SESSIONS] = SessionTable(config.session_secret)
    app[SHELL] = ShellBundle(config.shell_bytes)
    app[HASH_ITERATIONS] = hash_iterations

    app.add_routes(route_defs(build_route_table()))
    app.add_routes(extra_route_defs())
    app.add_routes(app[SHELL].routes())

    async def on_startup(app):
        if isinstance(store, DocumentStore):
            await store.start()

    async def on_cleanup(app):
        if isinstance(store, DocumentStore):
            await store.stop()
        if owns_store:
            store.close()

    app.on_startup.append(on_startup)
    app.on_cleanup.append(on_cleanup)
    return app


class ApiServer:
    """A running service: start() binds the port, close() drains and releases the store."""

    def __init__(self, config: ServerConfig, store: Optional[StoreContract] = None,
                 hash_iterations: int = PBKDF2_ITERATIONS):
        self.config = config
        self.app = create_app(config, store, hash_iterations)
        self.runner: Optional[web.AppRunner] = None
        self.port = config.port

    @property
    def base_url(self) -> str:
        return f"http://{self.config.host}:{self.port}"

    async def start(self):
        self.runner = web.AppRunner(self.app, access_log_class=AccessLogger,
                                    access_log=logging.getLogger(ACCESS_LOGGER_NAME))
        await self.runner.setup()
        site = web.TCPSite(self.runner, self.config.host, self.config.port)
        try:
            await site.start()
        except OSError as ex:
            await self.runner.cleanup()
            if ex.errno == errno.EADDRINUSE:
                raise PortInUse(f"port {self.config.port} is already in use")
            raise
        # port 0 asks the OS for a free one
        self.port = self.runner.addresses[0][1]
        logger.info(f"serving {self.app[STORE].kind.value} backend on {self.base_url}")

    async def close(self):
        if self.runner:
            await self.runner.cleanup()
            self.runner = None
