"""
Password hashing, the in-memory session table and credential checks for login.

New accounts always use PBKDF2-HMAC-SHA256 (10,000 iterations, 64-byte key,
base64). Imported accounts may carry the legacy form instead: their `salt`
field holds LEGACY_SALT_MARKER and `passwordHash` holds a 16-character salt
followed by the hex SHA-256 of (salt + password). Those are verify-only.
"""
import asyncio
import base64
import hashlib
import hmac
import secrets
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from model import Collection, Role
from vre.errors import VreError
from vre.logs import get_logger

logger = get_logger(__name__)

PBKDF2_ITERATIONS = 10_000
PBKDF2_KEY_LENGTH = 64
SALT_BYTES = 16
LEGACY_SALT_LENGTH = 16
LEGACY_SALT_MARKER = "legacy-sha256"
SESSION_COOKIE = "vre.sid"
LOGIN_FAILED_MESSAGE = "Invalid username or password"


class AuthFailed(VreError):
    pass


class MalformedStoredField(VreError):
    pass


class PasswordScheme(str, Enum):
    PBKDF2_SHA256 = "Pbkdf2Sha256"
    LEGACY_SHA256_CONCAT = "LegacySha256Concat"


def new_salt() -> str:
    return base64.b64encode(secrets.token_bytes(SALT_BYTES)).decode("ascii")


def hash_password(password: str, salt: str, iterations: int = PBKDF2_ITERATIONS,
                  key_length: int = PBKDF2_KEY_LENGTH) -> str:
    if not salt:
        raise ValueError("salt must not be empty")
    key = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt.encode("utf-8"), iterations, key_length)
    return base64.b64encode(key).decode("ascii")


def legacy_stored_field(password: str, salt: str) -> str:
    """Builds the old system's stored form; only used to import accounts and in fixtures."""
    if len(salt) != LEGACY_SALT_LENGTH:
        raise ValueError(f"legacy salts are {LEGACY_SALT_LENGTH} characters")
    return salt + hashlib.sha256((salt + password).encode("utf-8")).hexdigest()


def verify_legacy(password: str, stored_field: str) -> bool:
    salt, digest = stored_field[:LEGACY_SALT_LENGTH], stored_field[LEGACY_SALT_LENGTH:]
    if len(salt) != LEGACY_SALT_LENGTH or len(digest) != 64:
        raise MalformedStoredField("legacy password field must be a salt followed by a 32-byte hex digest")
    try:
        bytes.fromhex(digest)
    except ValueError:
        raise MalformedStoredField("legacy password digest is not hex")
    expected = hashlib.sha256((salt + password).encode("utf-8")).hexdigest()
    return hmac.compare_digest(expected, digest)


def scheme_of(account: dict) -> PasswordScheme:
    if account.get("salt") == LEGACY_SALT_MARKER:
        return PasswordScheme.LEGACY_SHA256_CONCAT
    return PasswordScheme.PBKDF2_SHA256


def verify_password(account: dict, password: str, iterations: int = PBKDF2_ITERATIONS) -> bool:
    if scheme_of(account) is PasswordScheme.LEGACY_SHA256_CONCAT:
        return verify_legacy(password, account.get("passwordHash") or "")
    candidate = hash_password(password, account["salt"], iterations)
    return hmac.compare_digest(candidate, account.get("passwordHash") or "")


@dataclass(frozen=True)
class Session:
    token: str
    account_id: str
    role: Role
    username: str
    issued_at: float


class SessionTable:
    """Opaque bearer tokens kept in memory; the cookie value is the token plus an HMAC under sessionSecret."""

    def __init__(self, secret: str):
        self._secret = secret.encode("utf-8")
        self._sessions: dict = {}
        self._lock = threading.Lock()

    def _sign(self, token: str) -> str:
        return hmac.new(self._secret, token.encode("ascii"), hashlib.sha256).hexdigest()[:32]

    def issue(self, account: dict) -> str:
        role = Role(account["role"])
        with self._lock:
            token = secrets.token_urlsafe(32)
            # a live token is never handed out twice
            while token in self._sessions:
                token = secrets.token_urlsafe(32)
            self._sessions[token] = Session(token=token, account_id=account["_id"], role=role,
                                            username=account["username"], issued_at=time.time())
        return f"{token}.{self._sign(token)}"

    def lookup(self, cookie: Optional[str]) -> Optional[Session]:
        if not cookie or "." not in cookie:
            return None
        token, signature = cookie.rsplit(".", 1)
        if not hmac.compare_digest(signature, self._sign(token)):
            return None
        with self._lock:
            return self._sessions.get(token)

    def revoke(self, cookie: Optional[str]) -> bool:
        session = self.lookup(cookie)
        if session is None:
            return False
        with self._lock:
            return self._sessions.pop(session.token, None) is not None

    def __len__(self):
        with self._lock:
            return len(self._sessions)


async def authenticate(store, username: str, password: str, iterations: int = PBKDF2_ITERATIONS) -> dict:
    """Returns the account document; unknown users and wrong passwords fail the same way."""
    matches = store.query(Collection.ACCOUNTS, {"username": username}) if username else []
    if not matches:
        # burn the same work as a real check so both failures look alike
        await asyncio.to_thread(hash_password, password or "", "unknown-user-salt", iterations)
        raise AuthFailed(LOGIN_FAILED_MESSAGE)
    account = matches[0]
    try:
        ok = await asyncio.to_thread(verify_password, account, password or "", iterations)
    except MalformedStoredField:
        logger.warning(f"account {account['_id']}: unreadable stored password field")
        ok = False
    if not ok:
        raise AuthFailed(LOGIN_FAILED_MESSAGE)
    return account
