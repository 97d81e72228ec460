from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from loadgen import Mode, ScenarioError
from loadgen.scripts import BUILTIN_SCRIPTS, builtin_script
from vre.config import parse_kv_lines
from vre.errors import BadConfig


@dataclass(frozen=True)
class Population:
    # (script name, percentage) in the order users are handed out
    mix: tuple

    def __post_init__(self):
        if not self.mix:
            raise ScenarioError("a population needs at least one virtual user")
        total = sum(weight for _, weight in self.mix)
        if abs(total - 100) > 1e-9:
            raise ScenarioError(f"population weights must sum to 100, got {total:g}")
        for name, weight in self.mix:
            if name not in BUILTIN_SCRIPTS:
                raise ScenarioError(f"unknown virtual user {name!r}")
            if weight < 0:
                raise ScenarioError(f"negative weight for {name}")

    @classmethod
    def single(cls, name: str) -> "Population":
        return cls(((name, 100),))

    def assign(self, users: int) -> list:
        """Script name per user index; largest-remainder rounding realizes the weights exactly."""
        quotas = [(name, users * weight / 100) for name, weight in self.mix]
        counts = [int(q) for _, q in quotas]
        leftover = users - sum(counts)
        by_remainder = sorted(range(len(quotas)), key=lambda i: (-(quotas[i][1] - counts[i]), i))
        for i in by_remainder[:leftover]:
            counts[i] += 1
        assignment = []
        for (name, _), count in zip(self.mix, counts):
            assignment += [name] * count
        return assignment

    def describe(self) -> str:
        return ", ".join(f"{name}:{weight:g}" for name, weight in self.mix)


@dataclass(frozen=True)
class Scenario:
    id: str
    name: str
    population: Population
    concurrent_users: int = 10
    iterations_per_user: int = 1
    mode: Mode = Mode.REFRESH
    think_ms: int = 0
    # overrides the built-in loop count; tests shrink it
    loops: Optional[int] = None
    script_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.concurrent_users < 0 or self.iterations_per_user < 0:
            raise ScenarioError("users and iterations must be non-negative")

    def scripts(self) -> list:
        return [builtin_script(name, self.loops, **self.script_options)
                for name in self.population.assign(self.concurrent_users)]


PRESETS = {
    "1": Scenario("1", "Add clinicians", Population.single("Add100"), mode=Mode.REFRESH),
    "2": Scenario("2", "Add goals", Population.single("Goal100"), mode=Mode.NO_REFRESH),
    "3": Scenario("3", "View patients, some goals", Population((("View100", 90), ("Goal100", 10))),
                  mode=Mode.REFRESH),
    "4": Scenario("4", "Update repository", Population.single("UpdateRep100"), mode=Mode.REFRESH),
    # 10 users, as launched in the recorded run
    "5": Scenario("5", "Goals and views", Population((("Goal100", 50), ("View100", 50))), mode=Mode.REFRESH),
}


def preset(scenario_id: str) -> Scenario:
    try:
        return PRESETS[str(scenario_id)]
    except KeyError:
        raise ScenarioError(f"unknown scenario {scenario_id!r}, expected one of {', '.join(PRESETS)}")


def parse_population(text: str) -> Population:
    """`View100:90, Goal100:10`, or a bare script name for 100%."""
    mix = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, sep, weight = item.partition(":")
        try:
            mix.append((name.strip(), float(weight) if sep else 100.0))
        except ValueError:
            raise ScenarioError(f"bad population weight in {item!r}")
    return Population(tuple(mix))


def _int(values: dict, key: str, default: int) -> int:
    raw = values.get(key)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(f"{key}: expected an integer, got {raw!r}")


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    """
    Declarative scenario file, one `key = value` per line:

        name = Refresh experiment
        script = UpdateRep100          # or: population = View100:90, Goal100:10
        users = 10
        iterations = 1
        mode = NoRefresh
        loops = 100                    # optional
        think = 0                      # optional, ms
    """
    try:
        values = parse_kv_lines(text, source)
    except BadConfig as ex:
        raise ScenarioError(str(ex))
    known = {"id", "name", "script", "population", "users", "iterations", "mode", "loops", "think", "uploadBytes"}
    unknown = set(values) - known
    if unknown:
        raise ScenarioError(f"{source}: unknown key(s) {', '.join(sorted(unknown))}")
    if ("script" in values) == ("population" in values):
        raise ScenarioError(f"{source}: give exactly one of script, population")

    population = (Population.single(values["script"]) if "script" in values
                  else parse_population(values["population"]))
    options = {}
    if "uploadBytes" in values:
        options["upload_bytes"] = _int(values, "uploadBytes", 0)
    loops = values.get("loops")
    return Scenario(
        id=values.get("id", Path(source).stem),
        name=values.get("name", Path(source).stem),
        population=population,
        concurrent_users=_int(values, "users", 10),
        iterations_per_user=_int(values, "iterations", 1),
        mode=Mode.parse(values.get("mode", Mode.REFRESH.value)),
        think_ms=_int(values, "think", 0),
        loops=_int(values, "loops", 0) if loops is not None else None,
        script_options=options,
    )


def load_scenario(path: Path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as ex:
        raise ScenarioError(f"cannot read {path}: {ex.strerror}")
    return parse_scenario(text, source=str(path))


def resolve_scenario(ref: str) -> Scenario:
    """A preset id, or a path to a scenario file."""
    if str(ref) in PRESETS:
        return preset(ref)
    if Path(ref).is_file():
        return load_scenario(Path(ref))
    raise ScenarioError(f"unknown scenario {ref!r}: not a preset ({', '.join(PRESETS)}) nor a readable file")
