"""Self-describing scenario files and the single-run pipeline built on them."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from .aco_router import AcoConfig
from .errors import ScenarioValidationError
from .ffa_planner import FfaConfig
from .ocean import ObstacleConfig, OceanConfig
from .seeding import child_rng
from .synchron import (
    MissionConfig,
    MissionLog,
    EnvConfig,
    run_mission,
    summary_row,
    table2_text,
    write_states,
)
from .terrain import (
    DEFAULT_SPEED,
    Connectivity,
    RasterMap,
    WaypointNetwork,
    build_network,
    classify_map,
    generate_waypoints,
    load_map,
    random_tasks,
    synthetic_raster,
    with_tasks,
)
from .vehicle import KinematicLimits

BUNDLED = ("experiment-standard", "local-demo", "montecarlo")


@dataclass(frozen=True)
class MapSpec:
    # "synthetic" islands, "open" water, or a raster "file"
    kind: str = "synthetic"
    size: int = 200
    cell_size: float = 50.0
    n_islands: int = 4
    k: int = 3
    path: str | None = None


@dataclass(frozen=True)
class NetworkSpec:
    nodes: int = 50
    target_arcs: int = 1600
    k: int | None = None
    # inclusive node-count range used by Monte Carlo campaigns instead of ``nodes``
    node_range: tuple[int, int] | None = None
    tasks: int = 10
    weight_range: tuple[int, int] = (2, 10)
    avoid_coast: bool = True
    # a saved network replaces generation entirely
    file: str | None = None


@dataclass(frozen=True)
class VehicleSpec:
    speed: float = DEFAULT_SPEED
    limits: KinematicLimits = KinematicLimits()


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    seed: int = 0
    t_total: float = 10800.0
    map: MapSpec = MapSpec()
    network: NetworkSpec = NetworkSpec()
    env: EnvConfig = EnvConfig()
    vehicle: VehicleSpec = VehicleSpec()
    aco: AcoConfig = AcoConfig()
    ffa: FfaConfig = FfaConfig()
    reserve: float = 0.15
    reserve_min: float = 300.0
    # directory that relative file references resolve against (not hashed)
    base_dir: str | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        data = asdict(self)
        data.pop("base_dir")
        return data

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()[:12]

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def with_seed(self, seed: int) -> "Scenario":
        return dataclasses.replace(self, seed=int(seed))

    def mission_config(self) -> MissionConfig:
        return MissionConfig(
            self.vehicle.speed, self.vehicle.limits, self.aco, self.ffa, self.env, self.reserve, self.reserve_min
        )

    def resolve(self, path: str) -> Path:
        p = Path(path)
        if not p.is_absolute() and self.base_dir is not None:
            p = Path(self.base_dir) / p
        return p

    @classmethod
    def from_dict(cls, data: dict, base_dir=None) -> "Scenario":
        problems: list[str] = []
        built = _build(cls, data, "", problems, skip={"base_dir"})
        if built is not None:
            problems.extend(_semantic_problems(built))
        if problems:
            raise ScenarioValidationError(problems)
        return dataclasses.replace(built, base_dir=None if base_dir is None else str(base_dir))

    @classmethod
    def load(cls, path) -> "Scenario":
        p = Path(path)
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioValidationError([f"{p}: not valid JSON ({exc})"]) from None
        return cls.from_dict(data, base_dir=p.parent)


def bundled(name: str) -> Scenario:
    """One of the scenarios shipped with the package."""
    if name not in BUNDLED:
        raise ScenarioValidationError([f"unknown bundled scenario {name!r}; choose from {', '.join(BUNDLED)}"])
    text = resources.files("auvmission.scenarios").joinpath(f"{name}.json").read_text()
    return Scenario.from_dict(json.loads(text))


def _build(cls, data, where: str, problems: list[str], skip=frozenset()):
    """Construct dataclass ``cls`` from a dict, recording every problem instead of stopping."""
    if not isinstance(data, dict):
        problems.append(f"{where or 'scenario'}: expected an object")
        return None
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)} - set(skip)
    for key in sorted(set(data) - names):
        problems.append(f"{where}{key}: unknown field")
    kwargs = {}
    n_before = len(problems)
    for name in sorted(names & set(data)):
        hint = hints[name]
        value = data[name]
        label = f"{where}{name}"
        if dataclasses.is_dataclass(hint):
            sub = _build(hint, value, label + ".", problems)
            if sub is not None:
                kwargs[name] = sub
            continue
        kwargs[name] = _coerce(value, hint, label, problems)
    if len(problems) > n_before:
        return None
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        problems.append(f"{where.rstrip('.') or 'scenario'}: {exc}")
        return None


def _coerce(value, hint, label: str, problems: list[str]):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union or (origin is not None and type(None) in args):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], label, problems)
    if origin is tuple:
        if not isinstance(value, (list, tuple)) or len(value) != len(args):
            problems.append(f"{label}: expected a list of {len(args)} values")
            return value
        return tuple(_coerce(v, a, label, problems) for v, a in zip(value, args))
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{label}: expected a number")
            return value
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{label}: expected an integer")
        return value
    if hint is bool:
        if not isinstance(value, bool):
            problems.append(f"{label}: expected true or false")
        return value
    if hint is str:
        if not isinstance(value, str):
            problems.append(f"{label}: expected a string")
        return value
    return value


def _semantic_problems(s: Scenario) -> list[str]:
    out = []
    if not s.t_total > 0:
        out.append("t_total: must be positive")
    if s.seed < 0:
        out.append("seed: must be non-negative")
    if s.map.kind not in ("synthetic", "open", "file"):
        out.append("map.kind: must be synthetic, open or file")
    if s.map.kind == "file" and not s.map.path:
        out.append("map.path: required when map.kind is file")
    if not s.map.cell_size > 0:
        out.append("map.cell_size: must be positive")
    if s.map.size < 1:
        out.append("map.size: must be positive")
    if s.network.file is None and s.network.nodes < 2:
        out.append("network.nodes: need at least two waypoints")
    if s.network.node_range is not None and not 2 <= s.network.node_range[0] <= s.network.node_range[1]:
        out.append("network.node_range: must be an increasing pair starting at 2 or more")
    if s.network.tasks < 0:
        out.append("network.tasks: must be non-negative")
    lo, hi = s.network.weight_range
    if not 1 < lo <= hi:
        out.append("network.weight_range: weights must exceed 1 and be increasing")
    if not s.vehicle.speed > 0:
        out.append("vehicle.speed: must be positive")
    if not 0 <= s.reserve < 1:
        out.append("reserve: must lie in [0, 1)")
    if s.env.obstacles_per_edge < 0:
        out.append("env.obstacles_per_edge: must be non-negative")
    return out


def build_map(s: Scenario) -> RasterMap:
    m = s.map
    if m.kind == "open":
        return RasterMap.all_water(m.size, m.size, m.cell_size)
    if m.kind == "file":
        return load_map(s.resolve(m.path), m.cell_size, m.k, s.seed)
    rgb = synthetic_raster(m.size, m.n_islands, rng=child_rng(s.seed, "terrain", 0))
    return classify_map(rgb, m.k, m.cell_size, seed=s.seed)


def build_network_for(s: Scenario, raster_map: RasterMap, nodes: int | None = None) -> WaypointNetwork:
    net_spec = s.network
    if net_spec.file is not None:
        return WaypointNetwork.load(s.resolve(net_spec.file))
    n = nodes or net_spec.nodes
    extent = raster_map.extent
    wps = generate_waypoints(raster_map, n, child_rng(s.seed, "terrain", 1), xy_range=(0.0, min(extent)))
    conn = Connectivity(net_spec.k, net_spec.target_arcs, net_spec.avoid_coast)
    net = build_network(wps, None, s.vehicle.speed, conn, raster_map)
    if net_spec.tasks:
        net = with_tasks(net, random_tasks(net, net_spec.tasks, net_spec.weight_range, child_rng(s.seed, "tasks")))
    return net


def build_world(s: Scenario) -> tuple[RasterMap, WaypointNetwork]:
    raster_map = build_map(s)
    return raster_map, build_network_for(s, raster_map)


def export_log(log: MissionLog, out_dir) -> dict[str, Path]:
    """Write every artifact that can be regenerated from a stored log."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mission, timing = log.save(out)
    (out / "table2.txt").write_text(table2_text(log))
    (out / "summary.tsv").write_text("\t".join(
        ("scenario", "seed", "outcome", "rep", "final_budget", "Cost_Total")) + "\n" + summary_row(log) + "\n")
    write_states(out / "states.csv", log)
    return {
        "mission": mission,
        "timing": timing,
        "table2": out / "table2.txt",
        "summary": out / "summary.tsv",
        "states": out / "states.csv",
    }


def run_scenario(s: Scenario, out_dir=None) -> tuple[MissionLog, dict[str, Path]]:
    """Build terrain and network, fly the mission, and write exports when ``out_dir`` is given."""
    raster_map, network = build_world(s)
    log = run_mission(network, s.t_total, s.mission_config(), s.seed, raster_map, s.hash)
    files: dict[str, Path] = {}
    if out_dir is not None:
        files = export_log(log, out_dir)
        out = Path(out_dir)
        (out / "scenario.json").write_text(json.dumps(
            {"scenario_hash": s.hash, "seed": s.seed, "scenario": s.to_dict()}, indent=1, sort_keys=True) + "\n")
        files["scenario"] = out / "scenario.json"
    return log, files


# keep the config classes importable from here for scenario authors
__all__ = [
    "AcoConfig", "EnvConfig", "FfaConfig", "MapSpec", "NetworkSpec", "ObstacleConfig", "OceanConfig",
    "Scenario", "VehicleSpec", "build_map", "build_network_for", "build_world", "bundled", "export_log",
    "run_scenario",
]
