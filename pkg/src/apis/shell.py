"""
The static "shell" served under /app: an index page plus script assets of inert bytes.

Only the byte cost matters. index.html is never cacheable, so every reload pays
for it in full; assets carry entity tags and answer a matching If-None-Match
with 304 Not Modified.
"""
import hashlib
from dataclasses import dataclass

from aiohttp import web

INDEX_PATH = "/app/index.html"
ASSET_COUNT = 11
INDEX_SHARE = 0.10


@dataclass(frozen=True)
class ShellFile:
    path: str
    body: bytes
    content_type: str

    @property
    def etag(self) -> str:
        return '"' + hashlib.sha1(self.body).hexdigest()[:20] + '"'


def _filler(seed: str, size: int) -> bytes:
    line = f"/* vre shell {seed} */\n".encode("ascii")
    return (line * (size // len(line) + 1))[:size]


class ShellBundle:
    def __init__(self, total_bytes: int):
        self.total_bytes = total_bytes
        self.assets: dict = {}
        if total_bytes <= 0:
            self.index = ShellFile(INDEX_PATH, b"", "text/html")
            return

        index_size = int(total_bytes * INDEX_SHARE)
        per_asset, remainder = divmod(total_bytes - index_size, ASSET_COUNT)
        for i in range(ASSET_COUNT):
            path = f"/app/assets/chunk{i:02d}.js"
            size = per_asset + (1 if i < remainder else 0)
            self.assets[path] = ShellFile(path, _filler(path, size), "application/javascript")

        tags = "".join(f'<script src="{p}"></script>\n' for p in self.assets)
        head = f"<!doctype html>\n<html><head><title>VRE</title>\n{tags}</head><body><!--".encode("ascii")
        tail = b"--></body></html>\n"
        padding = max(0, index_size - len(head) - len(tail))
        self.index = ShellFile(INDEX_PATH, head + _filler("index", padding) + tail, "text/html")

    @property
    def size(self) -> int:
        return len(self.index.body) + sum(len(f.body) for f in self.assets.values())

    async def serve_index(self, request: web.Request) -> web.Response:
        return web.Response(body=self.index.body, content_type=self.index.content_type,
                            headers={"Cache-Control": "no-cache, no-store, must-revalidate"})

    async def serve_asset(self, request: web.Request) -> web.Response:
        asset = self.assets.get(request.path)
        if asset is None:
            raise web.HTTPNotFound()
        headers = {"ETag": asset.etag, "Cache-Control": "no-cache"}
        if request.headers.get("If-None-Match") == asset.etag:
            return web.Response(status=304, headers=headers)
        return web.Response(body=asset.body, content_type=asset.content_type, headers=headers)

    def routes(self) -> list:
        return [
            web.get(INDEX_PATH, self.serve_index),
            web.get("/app/assets/{name}", self.serve_asset),
        ]
