"""
Virtual-user scripts: an ordered list of actions, hand-authored.

Paths and bodies are templates rendered with `str.format_map` over the user's
variables: `user` (0-based user index), `clinician` (1..10, the seeded
clinician this user logs in as), `iter` (iteration), `i`/`n` (0/1-based loop
counter), `item` (current element of a Loop's `over` list) and every variable
an Extract has captured.
"""
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from loadgen import Mode, ScenarioError
from model import Collection
from vre.seed import ADMIN_PASSWORD, ADMIN_USERNAME, CLINICIAN_PASSWORD

MUTATING_METHODS = ("POST", "PUT", "DELETE")
DEFAULT_UPLOAD_BYTES = 11_000_000


@dataclass(frozen=True)
class Extract:
    """Captures `field` from a JSON response into `var`.

    pick: "one" reads a single document, "all" keeps the field of every listed
    document, "user" keeps the field of the listed document at index user.
    """
    var: str
    field: str = "_id"
    pick: str = "one"


@dataclass(frozen=True)
class Login:
    username: str
    password: str


@dataclass(frozen=True)
class Logout:
    pass


@dataclass(frozen=True)
class PageLoad:
    label: str = "App shell"


@dataclass(frozen=True)
class Request:
    method: str
    path: str
    body: Optional[dict] = None
    label: str = ""
    extract: Optional[Extract] = None
    navigates: bool = False

    @property
    def mutates(self) -> bool:
        return self.method in MUTATING_METHODS


@dataclass(frozen=True)
class Upload:
    path: str
    fields: dict
    file_name: str
    size: int
    media_type: str = "video/mp4"
    label: str = "Upload Repository"
    extract: Optional[Extract] = None

    @property
    def mutates(self) -> bool:
        return True


@dataclass(frozen=True)
class Think:
    ms: int


@dataclass(frozen=True)
class Loop:
    count: int
    actions: tuple
    over: Optional[str] = None


Action = Union[Login, Logout, PageLoad, Request, Upload, Think, Loop]


@dataclass(frozen=True)
class VirtualUserScript:
    name: str
    actions: tuple
    # seeded records the script needs before it can run
    requires: dict = field(default_factory=dict)

    def __post_init__(self):
        for action in _walk(self.actions):
            if isinstance(action, Loop) and action.count < 0:
                raise ScenarioError(f"{self.name}: loop counts must be non-negative")


def _walk(actions):
    for action in actions:
        yield action
        if isinstance(action, Loop):
            yield from _walk(action.actions)


def count_mutations(script: VirtualUserScript) -> int:
    """Mutating requests one iteration issues, loops unrolled."""

    def count(actions) -> int:
        total = 0
        for action in actions:
            if isinstance(action, Loop):
                total += action.count * count(action.actions)
            elif isinstance(action, (Request, Upload)) and action.mutates:
                total += 1
        return total

    return count(script.actions)


def refresh_mode(script: VirtualUserScript, mode: Mode) -> VirtualUserScript:
    """Refresh reloads the shell after every mutation and every navigating read; NoRefresh leaves the script as is."""
    if mode is Mode.NO_REFRESH:
        return script

    def expand(actions) -> tuple:
        out = []
        for action in actions:
            if isinstance(action, Loop):
                out.append(replace(action, actions=expand(action.actions)))
                continue
            out.append(action)
            if isinstance(action, (Request, Upload)) and (action.mutates or getattr(action, "navigates", False)):
                out.append(PageLoad("Refresh"))
        return tuple(out)

    return replace(script, actions=expand(script.actions))


# --- built-in virtual users ---

def _admin_login() -> Login:
    return Login(ADMIN_USERNAME, ADMIN_PASSWORD)


def _clinician_login() -> Login:
    return Login("clinician{clinician:02d}", CLINICIAN_PASSWORD)


def add100(loops: int = 100) -> VirtualUserScript:
    """Log on as administrator, add clinicians, log out."""
    return VirtualUserScript("Add100", (
        PageLoad(),
        _admin_login(),
        Loop(loops, (
            Request("POST", "/api/account", {
                "username": "clinician-u{user}-r{iter}-{n:03d}",
                "password": CLINICIAN_PASSWORD,
                "role": "Clinician",
                "displayName": "Clinician {user}-{iter}-{n:03d}",
            }, label="Add Clinician"),
        )),
        Logout(),
    ))


def goal100(loops: int = 100) -> VirtualUserScript:
    """Log on as a clinician and add goals to one patient."""
    return VirtualUserScript("Goal100", (
        PageLoad(),
        _clinician_login(),
        Request("GET", "/api/patient", label="List Patients", extract=Extract("patientId", pick="user")),
        Loop(loops, (
            Request("POST", "/api/goal", {
                "patientId": "{patientId}",
                "description": "Walk {n:03d} m unaided",
                "term": "Short",
            }, label="Add Goal"),
        )),
        Logout(),
    ), requires={Collection.PATIENTS.value: 1})


def view100(loops: int = 100) -> VirtualUserScript:
    """Log on as a clinician and open patients one after another."""
    return VirtualUserScript("View100", (
        PageLoad(),
        _clinician_login(),
        Request("GET", "/api/patient", label="List Patients", extract=Extract("patientIds", pick="all")),
        Loop(loops, (
            Request("GET", "/api/patient/{item}", label="View Patient", navigates=True),
        ), over="patientIds"),
        Logout(),
    ), requires={Collection.PATIENTS.value: loops})


def update_rep100(loops: int = 100) -> VirtualUserScript:
    """Log on as administrator and rename repository items."""
    return VirtualUserScript("UpdateRep100", (
        PageLoad(),
        _admin_login(),
        Request("GET", "/api/repository", label="List Repository", extract=Extract("contentIds", pick="all")),
        Loop(loops, (
            Request("PUT", "/api/repository/{item}", {"name": "Repository item {n:03d} by user {user}"},
                    label="Update Repository"),
        ), over="contentIds"),
        Logout(),
    ), requires={Collection.CONTENTS.value: loops})


def operations(loops: int = 10, upload_bytes: int = DEFAULT_UPLOAD_BYTES) -> VirtualUserScript:
    """One of each treatment and repository operation per loop, labelled for time decomposition."""
    return VirtualUserScript("Operations", (
        PageLoad(),
        _clinician_login(),
        Request("GET", "/api/patient", label="List Patients", extract=Extract("patientId", pick="user")),
        Request("GET", "/api/category", label="List Categories", extract=Extract("categoryId", pick="all")),
        Loop(loops, (
            Request("POST", "/api/treatment", {
                "patientId": "{patientId}", "title": "Exercise {n:03d}",
                "description": "Lift the cup to shoulder height", "repetitionsPerDay": 3,
            }, label="Create Treatment", extract=Extract("treatmentId")),
            Request("GET", "/api/treatment/{treatmentId}", label="View Treatment", navigates=True),
            Request("PUT", "/api/treatment/{treatmentId}", {"repetitionsPerDay": 5}, label="Update Treatment"),
            Upload("/api/repository", {"name": "Upload {user}-{n:03d}", "pat_desc": "Watch this first",
                                       "clin_desc": "Demonstration", "category": "{categoryId[0]}"},
                   file_name="exercise.mp4", size=upload_bytes, extract=Extract("contentId")),
            Request("POST", "/api/treatmentcontent", {"treatmentId": "{treatmentId}", "contentId": "{contentId}"},
                    label="Assign Content", extract=Extract("linkId")),
            Request("DELETE", "/api/treatmentcontent/{linkId}", label="Unassign Content"),
            Request("DELETE", "/api/treatment/{treatmentId}", label="Delete Treatment"),
        )),
        Logout(),
    ), requires={Collection.PATIENTS.value: 1})


BUILTIN_SCRIPTS = {
    "Add100": add100,
    "Goal100": goal100,
    "View100": view100,
    "UpdateRep100": update_rep100,
    "Operations": operations,
}


def builtin_script(name: str, loops: Optional[int] = None, **kwargs) -> VirtualUserScript:
    factory = BUILTIN_SCRIPTS.get(name)
    if factory is None:
        raise ScenarioError(f"unknown virtual user {name!r}, expected one of {', '.join(BUILTIN_SCRIPTS)}")
    if loops is not None:
        kwargs["loops"] = loops
    return factory(**kwargs)
