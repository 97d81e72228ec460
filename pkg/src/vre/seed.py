"""
Deterministic fixture data. The same profile yields the same records, in the same
creation order, on either backend; only the generated ids differ.
"""
import base64
import random
import shutil
import string
from dataclasses import dataclass, field
from pathlib import Path

from apis.auth import PBKDF2_ITERATIONS, hash_password
from model import PROFILE_COLLECTIONS, Collection, ContentKind, Role, Term
from storage import StoreContract
from vre.errors import BadConfig, DirNotEmpty
from vre.logs import get_logger

logger = get_logger(__name__)

ADMIN_USERNAME = "admin"
ADMIN_PASSWORD = "admin-password"
CLINICIAN_PASSWORD = "clinician-password"
PATIENT_PASSWORD = "patient-password"

CATEGORY_TREE = {
    "Exercises": ("Upper limb", "Lower limb", "Balance"),
    "Education": ("Advice", "Recovery stories"),
}

MEDIA = (("video/mp4", ".mp4"), ("audio/mpeg", ".mp3"), ("text/plain", ".txt"))
TOKEN_ALPHABET = string.ascii_letters + string.digits + "-_"


@dataclass(frozen=True)
class SeedProfile:
    admins: int = 1
    clinicians: int = 10
    patients: int = 150
    contents: int = 150
    goals_per_patient: int = 1
    treatments_per_patient: int = 1
    information_per_patient: int = 1
    seed: int = 2015


DEFAULT_PROFILE = SeedProfile()


@dataclass
class SeedSummary:
    counts: dict = field(default_factory=dict)
    admin_ids: list = field(default_factory=list)
    clinician_usernames: list = field(default_factory=list)
    patient_ids: list = field(default_factory=list)
    content_ids: list = field(default_factory=list)


def clinician_username(i: int) -> str:
    return f"clinician{i:02d}"


def patient_username(i: int) -> str:
    return f"patient{i:03d}"


def prepare_data_dir(data_dir: Path, force: bool = False):
    data_dir = Path(data_dir)
    if data_dir.exists() and any(data_dir.iterdir()):
        if not force:
            raise DirNotEmpty(f"{data_dir} is not empty (use --force to reset it)")
        logger.warning(f"resetting {data_dir}")
        shutil.rmtree(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)


class Seeder:
    def __init__(self, store: StoreContract, profile: SeedProfile = DEFAULT_PROFILE,
                 content_root: str = "repository", hash_iterations: int = PBKDF2_ITERATIONS):
        self.store = store
        self.profile = profile
        self.content_root = content_root.rstrip("/")
        self.hash_iterations = hash_iterations
        self.rng = random.Random(profile.seed)
        self.summary = SeedSummary()

    def _salt(self) -> str:
        return base64.b64encode(self.rng.getrandbits(128).to_bytes(16, "big")).decode("ascii")

    def _token(self) -> str:
        return "".join(self.rng.choice(TOKEN_ALPHABET) for _ in range(24))

    def account(self, username: str, password: str, role: Role, display_name: str, **profile) -> tuple:
        salt = self._salt()
        account_id = self.store.create(Collection.ACCOUNTS, {
            "username": username, "salt": salt, "role": role.value,
            "passwordHash": hash_password(password, salt, self.hash_iterations),
        })
        profile_id = self.store.create(PROFILE_COLLECTIONS[role],
                                       {"accountId": account_id, "displayName": display_name, **profile})
        return account_id, profile_id

    def run(self) -> SeedSummary:
        p = self.profile
        if p.contents and not (p.admins or p.clinicians):
            raise BadConfig("repository items need an administrator or a clinician to own them")
        admin_account = None
        for i in range(p.admins):
            username = ADMIN_USERNAME if i == 0 else f"{ADMIN_USERNAME}{i + 1:02d}"
            admin_account, admin_id = self.account(username, ADMIN_PASSWORD, Role.ADMINISTRATOR, "Administrator")
            self.summary.admin_ids.append(admin_id)

        clinician_ids, clinician_accounts = [], []
        for i in range(1, p.clinicians + 1):
            clinician_account, clinician_id = self.account(clinician_username(i), CLINICIAN_PASSWORD,
                                                           Role.CLINICIAN, f"Dr {i:02d}")
            clinician_ids.append(clinician_id)
            clinician_accounts.append(clinician_account)
            self.summary.clinician_usernames.append(clinician_username(i))

        categories = []
        for parent, children in CATEGORY_TREE.items():
            parent_id = self.store.create(Collection.CATEGORIES, {"name": parent, "parentId": None})
            for child in children:
                categories.append(self.store.create(Collection.CATEGORIES, {"name": child, "parentId": parent_id}))

        # without administrators the first clinician owns the repository
        creator = admin_account or (clinician_accounts[0] if clinician_accounts else None)
        for i in range(1, p.contents + 1):
            media_type, ext = MEDIA[(i - 1) % len(MEDIA)]
            self.summary.content_ids.append(self.store.create(Collection.CONTENTS, {
                "name": f"Repository item {i:03d}",
                "mediaType": media_type,
                "kind": ContentKind.from_media_type(media_type).value,
                "patient_description": f"Follow along with item {i:03d}",
                "clinician_description": f"Prescribe item {i:03d} for daily practice",
                "categoryId": categories[(i - 1) % len(categories)],
                "path": f"{self.content_root}/{self._token()}{ext}",
                "creatorId": creator,
            }))

        for i in range(1, p.patients + 1):
            _, patient_id = self.account(patient_username(i), PATIENT_PASSWORD, Role.PATIENT, f"Patient {i:03d}",
                                         interfaceConfig={"fontScale": 1 + i % 3, "highContrast": i % 2 == 0})
            self.summary.patient_ids.append(patient_id)
            if clinician_ids:
                self.store.create(Collection.CLINICIANS_PATIENTS, {
                    "clinicianId": clinician_ids[(i - 1) % len(clinician_ids)], "patientId": patient_id})
            for g in range(p.goals_per_patient):
                self.store.create(Collection.GOALS, {
                    "patientId": patient_id, "description": f"Walk {10 * (g + 1)} m unaided",
                    "term": (Term.SHORT if g % 2 == 0 else Term.LONG).value, "comments": []})
            for t in range(p.treatments_per_patient):
                treatment_id = self.store.create(Collection.TREATMENTS, {
                    "patientId": patient_id, "title": f"Daily exercise {t + 1}",
                    "description": "Reach for a glass on the table", "repetitionsPerDay": 3 + t})
                if self.summary.content_ids:
                    content_id = self.summary.content_ids[(i + t - 1) % len(self.summary.content_ids)]
                    self.store.create(Collection.TREATMENT_CONTENT, {
                        "treatmentId": treatment_id, "informationId": None, "contentId": content_id})
            for n in range(p.information_per_patient):
                self.store.create(Collection.INFORMATION, {
                    "patientId": patient_id, "title": f"Advice sheet {n + 1}",
                    "body": "Rest between sets and keep a diary of your progress."})

        self.summary.counts = {c.value: self.store.count(c) for c in Collection}
        logger.info(f"seeded {self.summary.counts[Collection.PATIENTS.value]} patients, "
                    f"{self.summary.counts[Collection.CONTENTS.value]} repository items")
        return self.summary


def seed_store(store: StoreContract, profile: SeedProfile = DEFAULT_PROFILE, content_root: str = "repository",
               hash_iterations: int = PBKDF2_ITERATIONS) -> SeedSummary:
    return Seeder(store, profile, content_root, hash_iterations).run()
