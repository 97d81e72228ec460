import asyncio
import functools
import re
import time
from typing import Optional

import aiohttp
import orjson

from loadgen import SeedMissing, TargetUnreachable
from loadgen.runlog import ACTION, PAGE, REQUEST, RawRunLog, RunEvent, RunMeta
from loadgen.scenarios import Scenario
from loadgen.scripts import (Extract, Login, Logout, Loop, PageLoad, Request, Think, Upload, VirtualUserScript,
                             refresh_mode)
from monitor import SamplerUnavailable
from monitor.aio_system_usage import AioSystemUsage
from vre.logs import get_logger

logger = get_logger(__name__)

INDEX_PATH = "/app/index.html"
SCRIPT_SRC_RE = re.compile(r'<script src="([^"]+)"')
SERVER_TIMING_APP_RE = re.compile(r"app;dur=([0-9.]+)")


class ActionFailed(Exception):
    """Breaks the current iteration of one virtual user; recorded as an action error."""


def _render(value, variables: dict):
    if isinstance(value, str):
        try:
            return value.format_map(variables)
        except (KeyError, IndexError, AttributeError) as ex:
            raise ActionFailed(f"template {value!r} needs {ex}")
    if isinstance(value, dict):
        return {k: _render(v, variables) for k, v in value.items()}
    if isinstance(value, list):
        return [_render(v, variables) for v in value]
    return value


def _extract(data: bytes, extract: Extract, user_idx: int):
    try:
        doc = orjson.loads(data)
    except orjson.JSONDecodeError:
        raise ActionFailed(f"{extract.var}: response is not JSON")
    try:
        if extract.pick == "one":
            return doc[extract.field]
        values = [d[extract.field] for d in doc]
    except (KeyError, TypeError):
        raise ActionFailed(f"{extract.var}: no {extract.field} in response")
    if not values:
        raise ActionFailed(f"{extract.var}: empty list")
    return values if extract.pick == "all" else values[user_idx % len(values)]


def response_bytes(resp: aiohttp.ClientResponse, body: bytes) -> int:
    status_line = f"HTTP/{resp.version.major}.{resp.version.minor} {resp.status} {resp.reason}\r\n"
    headers = sum(len(k) + len(v) + 4 for k, v in resp.raw_headers) + 2
    return len(status_line) + headers + len(body)


def request_bytes(method: str, path: str, sent_headers, body_size: int) -> int:
    request_line = f"{method} {path} HTTP/1.1\r\n"
    headers = sum(len(k) + len(v) + 4 for k, v in sent_headers.items()) + 2
    return len(request_line) + headers + body_size


def server_ms(header: Optional[str]) -> Optional[float]:
    if not header:
        return None
    match = SERVER_TIMING_APP_RE.search(header)
    return float(match.group(1)) if match else None


@functools.lru_cache(maxsize=4)
def _upload_payload(size: int) -> bytes:
    return b"\x00" * size


class VirtualUser:
    def __init__(self, user_idx: int, script: VirtualUserScript, base_url: str, t0: float,
                 iterations: int = 1, think_ms: int = 0):
        self.user_idx = user_idx
        self.script = script
        self.base_url = base_url
        self.t0 = t0
        self.iterations = iterations
        self.think_ms = think_ms
        self.events: list = []
        self.variables: dict = {"user": user_idx, "clinician": user_idx % 10 + 1}
        self.etags: dict = {}
        self.pages = 0
        self.iterations_completed = 0
        self.session: Optional[aiohttp.ClientSession] = None

    def _now_ms(self) -> float:
        return (time.perf_counter() - self.t0) * 1000

    async def run(self):
        # the service is addressed by IP, which the default cookie jar refuses
        jar = aiohttp.CookieJar(unsafe=True)
        timeout = aiohttp.ClientTimeout(total=None)
        async with aiohttp.ClientSession(base_url=self.base_url, cookie_jar=jar, timeout=timeout) as session:
            self.session = session
            for iteration in range(self.iterations):
                self.variables["iter"] = iteration
                try:
                    await self._run_actions(self.script.actions)
                    self.iterations_completed += 1
                except ActionFailed as ex:
                    self.events.append(RunEvent(self.user_idx, ACTION, label=str(ex), start_ms=self._now_ms(),
                                                error_flag=1))
                    logger.warning(f"user {self.user_idx} ({self.script.name}) iteration {iteration}: {ex}")
        self.session = None
        return self

    async def _run_actions(self, actions):
        for action in actions:
            if isinstance(action, Loop):
                await self._loop(action)
            elif isinstance(action, PageLoad):
                await self._page_load(action)
            elif isinstance(action, Login):
                await self._login(action)
            elif isinstance(action, Logout):
                await self._exchange("POST", "/api/auth/logout", label="Logout")
            elif isinstance(action, Request):
                await self._request(action)
            elif isinstance(action, Upload):
                await self._upload(action)
            elif isinstance(action, Think):
                await asyncio.sleep(action.ms / 1000)

    async def _loop(self, loop: Loop):
        for i in range(loop.count):
            if loop.over is not None:
                items = self.variables.get(loop.over)
                if not items:
                    raise ActionFailed(f"loop over {loop.over}: nothing to iterate")
                self.variables["item"] = items[i % len(items)]
            self.variables["i"] = i
            self.variables["n"] = i + 1
            await self._run_actions(loop.actions)

    async def _exchange(self, method: str, path: str, *, label: str, body: Optional[bytes] = None,
                        data=None, body_size: int = 0, headers: Optional[dict] = None,
                        page: Optional[int] = None):
        event = RunEvent(self.user_idx, REQUEST, label=label, method=method, path=path, page=page,
                         start_ms=self._now_ms())
        headers = dict(headers or {})
        if body is not None:
            headers["Content-Type"] = "application/json"
            data, body_size = body, len(body)
        started = time.perf_counter()
        payload, resp_headers = b"", {}
        try:
            async with self.session.request(method, path, data=data, headers=headers) as resp:
                event.ttfb_ms = (time.perf_counter() - started) * 1000
                payload = await resp.read()
                event.status = resp.status
                event.bytes_down = response_bytes(resp, payload)
                event.bytes_up = request_bytes(method, path, resp.request_info.headers, body_size)
                event.server_ms = server_ms(resp.headers.get("Server-Timing"))
                resp_headers = resp.headers
        except (aiohttp.ClientError, OSError) as ex:
            logger.debug(f"user {self.user_idx}: {method} {path} failed: {ex}")
        event.elapsed_ms = (time.perf_counter() - started) * 1000
        event.error_flag = 1 if event.status == 0 or event.status >= 400 else 0
        self.events.append(event)
        if self.think_ms and page is None:
            await asyncio.sleep(self.think_ms / 1000)
        return event, payload, resp_headers

    async def _page_load(self, action: PageLoad):
        page = self.pages
        self.pages += 1
        first = len(self.events)
        start_ms = self._now_ms()

        index, body, _ = await self._exchange("GET", INDEX_PATH, label=action.label, page=page)
        sources = SCRIPT_SRC_RE.findall(body.decode("utf-8", "replace")) if index.status == 200 else []
        for src in sources:
            headers = {"If-None-Match": self.etags[src]} if src in self.etags else None
            event, _, resp_headers = await self._exchange("GET", src, label=action.label, headers=headers, page=page)
            if event.status == 200 and "ETag" in resp_headers:
                self.etags[src] = resp_headers["ETag"]

        parts = self.events[first:]
        timings = [e.server_ms for e in parts if e.server_ms is not None]
        self.events.insert(first, RunEvent(
            self.user_idx, PAGE, label=action.label, method="GET", path=INDEX_PATH, status=index.status,
            bytes_down=sum(e.bytes_down for e in parts), bytes_up=sum(e.bytes_up for e in parts),
            start_ms=start_ms, elapsed_ms=self._now_ms() - start_ms, ttfb_ms=index.ttfb_ms,
            server_ms=sum(timings) if timings else None,
            error_flag=1 if any(e.error_flag for e in parts) else 0, page=page,
        ))

    async def _login(self, action: Login):
        body = orjson.dumps({"username": _render(action.username, self.variables),
                             "password": _render(action.password, self.variables)})
        event, _, _ = await self._exchange("POST", "/api/auth/login", label="Login", body=body)
        if event.error_flag:
            raise ActionFailed(f"login failed with status {event.status}")

    async def _request(self, action: Request):
        path = _render(action.path, self.variables)
        body = orjson.dumps(_render(action.body, self.variables)) if action.body is not None else None
        event, payload, _ = await self._exchange(action.method, path, label=action.label or path, body=body)
        self._capture(action.extract, event, payload)

    async def _upload(self, action: Upload):
        form = aiohttp.FormData()
        fields = _render(action.fields, self.variables)
        for name, value in fields.items():
            form.add_field(name, str(value))
        form.add_field("file", _upload_payload(action.size), filename=action.file_name,
                       content_type=action.media_type)
        size = action.size + sum(len(k) + len(str(v)) for k, v in fields.items())
        path = _render(action.path, self.variables)
        event, payload, _ = await self._exchange("POST", path, label=action.label, data=form, body_size=size)
        self._capture(action.extract, event, payload)

    def _capture(self, extract: Optional[Extract], event: RunEvent, payload: bytes):
        if extract is None:
            return
        if event.error_flag:
            raise ActionFailed(f"{event.label}: status {event.status}, cannot read {extract.var}")
        self.variables[extract.var] = _extract(payload, extract, self.user_idx)


async def probe(base_url: str) -> dict:
    """GET /api/status; anything but a 200 JSON answer means the target is unreachable."""
    try:
        async with aiohttp.ClientSession(base_url=base_url, timeout=aiohttp.ClientTimeout(total=10)) as session:
            async with session.get("/api/status") as resp:
                if resp.status != 200:
                    raise TargetUnreachable(f"{base_url}/api/status answered {resp.status}")
                return orjson.loads(await resp.read())
    except (aiohttp.ClientError, OSError, asyncio.TimeoutError, orjson.JSONDecodeError) as ex:
        raise TargetUnreachable(f"cannot reach {base_url}: {ex}")


def check_seed(scripts: list, counts: dict):
    for script in scripts:
        for collection, needed in script.requires.items():
            have = counts.get(collection, 0)
            if have < needed:
                raise SeedMissing(f"{script.name} needs {needed} {collection}, the target has {have}")


async def run_scenario(scenario: Scenario, base_url: str, sample_resources: bool = True,
                       sample_interval_ms: int = 500, sample_pid: Optional[int] = None) -> RawRunLog:
    status = await probe(base_url)
    assignments = scenario.population.assign(scenario.concurrent_users)
    scripts = [refresh_mode(s, scenario.mode) for s in scenario.scripts()]
    check_seed(scripts, status.get("counts", {}))

    sampler = None
    if sample_resources:
        try:
            sampler = AioSystemUsage(interval_ms=sample_interval_ms, pid=sample_pid)
            await sampler.start()
        except SamplerUnavailable as ex:
            logger.warning(f"{ex}; the run log will carry no resource samples")
            sampler = None

    logger.info(f"scenario {scenario.id} ({scenario.population.describe()}): {scenario.concurrent_users} users x "
                f"{scenario.iterations_per_user} iterations, {scenario.mode.value}, against {base_url}")
    t0 = time.perf_counter()
    start_wall_ms = time.time() * 1000
    users = [VirtualUser(i, script, base_url, t0, scenario.iterations_per_user, scenario.think_ms)
             for i, script in enumerate(scripts)]
    try:
        await asyncio.gather(*(u.run() for u in users))
    finally:
        end_wall_ms = start_wall_ms + (time.perf_counter() - t0) * 1000
        if sampler is not None:
            await sampler.close()

    meta = RunMeta(
        scenario=scenario.id, backend=status.get("backend", ""), mode=scenario.mode.value,
        users=len(users), iterations=scenario.iterations_per_user,
        start_wall_ms=start_wall_ms, end_wall_ms=end_wall_ms, target=base_url, assignments=assignments,
        iterations_completed=sum(u.iterations_completed for u in users),
        resources=sampler.stats().to_doc() if sampler is not None else None,
    )
    events = [e for u in users for e in u.events]
    logger.info(f"scenario {scenario.id}: {len(events)} events in {meta.duration_sec:.1f} s")
    return RawRunLog(meta, events)
