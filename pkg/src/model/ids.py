import itertools
import re
import secrets
import threading
from typing import Optional

from model import BackendKind

DOCUMENT_ID_RE = re.compile(r"^[0-9a-f]{24}$")
NORMALIZED_ID_RE = re.compile(r"^[1-9][0-9]*$")


class IdAllocator:
    """Hands out fresh ids in the backend's format.

    Document ids are 24 lowercase hex characters (12 random bytes); normalized ids
    are a monotone decimal counter that resumes after the highest id already stored.
    """

    def __init__(self, kind: BackendKind, start: int = 1):
        self.kind = BackendKind(kind)
        self._counter = itertools.count(start)
        self._lock = threading.Lock()

    def next(self) -> str:
        if self.kind is BackendKind.DOCUMENT:
            return secrets.token_hex(12)
        with self._lock:
            return str(next(self._counter))


def new_entity_id(kind: BackendKind, allocator: Optional[IdAllocator] = None) -> str:
    if allocator is None:
        allocator = IdAllocator(kind)
    return allocator.next()


def is_valid_id(kind: BackendKind, value: str) -> bool:
    pattern = DOCUMENT_ID_RE if BackendKind(kind) is BackendKind.DOCUMENT else NORMALIZED_ID_RE
    return isinstance(value, str) and bool(pattern.match(value))
