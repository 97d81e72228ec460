import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Mapping

from vre.errors import BadConfig

BACKENDS = ("document", "normalized")
WRITE_CONCERNS = ("journaled", "unjournaled")

DEFAULT_SHELL_BYTES = 6_000_000

# config file key -> environment variable
CONFIG_KEYS = {
    "db": "VRE_DB",
    "sessionSecret": "VRE_SESSION_SECRET",
    "VRE_GLOBAL_REPOSITORY": "VRE_GLOBAL_REPOSITORY",
    "port": "VRE_PORT",
    "openReads": "VRE_OPEN_READS",
    "flushIntervalMs": "VRE_FLUSH_INTERVAL_MS",
    "writeConcern": "VRE_WRITE_CONCERN",
    "shellBytes": "VRE_SHELL_BYTES",
}


def parse_kv_lines(text: str, source: str = "<string>") -> dict[str, str]:
    """Parses the line-oriented `key = value` format shared by config, scenario and cluster files."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadConfig(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def parse_kv_file(path: Path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as ex:
        raise BadConfig(f"cannot read {path}: {ex.strerror}")
    return parse_kv_lines(text, source=str(path))


def parse_bool(value: str, key: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise BadConfig(f"{key}: expected a boolean, got {value!r}")


def parse_positive_int(value: str, key: str, allow_zero: bool = False) -> int:
    try:
        number = int(value)
    except ValueError:
        raise BadConfig(f"{key}: expected an integer, got {value!r}")
    if number < 0 or (number == 0 and not allow_zero):
        raise BadConfig(f"{key}: must be {'non-negative' if allow_zero else 'positive'}")
    return number


@dataclass(frozen=True)
class ServerConfig:
    backend: str = "document"
    data_dir: Path = Path("data")
    session_secret: str = "developmentSessionSecret"
    content_root: str = ""
    host: str = "127.0.0.1"
    port: int = 3333
    open_reads: bool = True
    flush_interval_ms: int = 100
    write_concern: str = "journaled"
    shell_bytes: int = DEFAULT_SHELL_BYTES
    access_log: Optional[Path] = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise BadConfig(f"db: unknown backend {self.backend!r}, expected one of {', '.join(BACKENDS)}")
        if self.write_concern not in WRITE_CONCERNS:
            raise BadConfig(f"writeConcern: expected one of {', '.join(WRITE_CONCERNS)}")
        if not self.content_root:
            object.__setattr__(self, "content_root", str(Path(self.data_dir) / "repository"))

    @property
    def content_root_is_url(self) -> bool:
        return "://" in self.content_root

    @property
    def repository_dir(self) -> Path:
        """Where uploaded bytes land; a CDN-style URL root keeps the files under the data directory."""
        if self.content_root_is_url:
            return Path(self.data_dir) / "repository"
        return Path(self.content_root)


def _apply(values: dict, key: str, raw: str):
    if key == "db":
        backend, sep, data_dir = raw.partition(":")
        if not sep or not data_dir:
            raise BadConfig(f"db: expected '<backend>:<dataDir>', got {raw!r}")
        values["backend"] = backend.strip()
        values["data_dir"] = Path(data_dir.strip())
    elif key == "sessionSecret":
        if not raw:
            raise BadConfig("sessionSecret: must not be empty")
        values["session_secret"] = raw
    elif key == "VRE_GLOBAL_REPOSITORY":
        if not raw:
            raise BadConfig("VRE_GLOBAL_REPOSITORY: must not be empty")
        values["content_root"] = raw.rstrip("/\\")
    elif key == "port":
        values["port"] = parse_positive_int(raw, key, allow_zero=True)
    elif key == "openReads":
        values["open_reads"] = parse_bool(raw, key)
    elif key == "flushIntervalMs":
        values["flush_interval_ms"] = parse_positive_int(raw, key)
    elif key == "writeConcern":
        values["write_concern"] = raw.lower()
    elif key == "shellBytes":
        values["shell_bytes"] = parse_positive_int(raw, key, allow_zero=True)
    else:
        raise BadConfig(f"unknown config key {key!r}")


def load_config(path: Optional[Path] = None, environ: Optional[Mapping[str, str]] = None,
                overrides: Optional[Mapping[str, str]] = None) -> ServerConfig:
    """Resolves the server config; flags (overrides) beat the environment, which beats the file."""
    environ = os.environ if environ is None else environ
    values: dict = {}

    if path is not None:
        for key, raw in parse_kv_file(path).items():
            _apply(values, key, raw)

    for key, env_name in CONFIG_KEYS.items():
        if env_name in environ:
            _apply(values, key, environ[env_name])

    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        _apply(values, key, str(raw))

    return ServerConfig(**values)


def with_port(config: ServerConfig, port: int) -> ServerConfig:
    return replace(config, port=port)
