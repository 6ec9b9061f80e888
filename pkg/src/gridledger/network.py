"""Grid data model, validation, and DC power-flow linear algebra.

The network is an immutable description of buses, generators, loads,
transmission lines, storage units, and supply contracts.  All operations in
this module are pure functions, so networks can be shared freely between
threads.  Flows follow the lossless DC approximation: line flow is a linear
function of nodal injections through the PTDF matrix built from line
reactances.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    InjectionBalanceError,
    NetworkFormatError,
    NetworkStructureError,
)

DEFAULT_REACTANCE = 1.0


@dataclass(frozen=True)
class Bus:
    """A node of the grid graph."""

    id: str
    name: str = ""

    @property
    def label(self) -> str:
        return self.name or self.id


@dataclass(frozen=True)
class Generator:
    """A dispatchable source with capacity, cost, and emission intensity."""

    id: str
    bus: str
    capacity: float          # MW
    marginal_cost: float     # $/MWh
    emission_rate: float     # ton CO2e/MWh


@dataclass(frozen=True)
class Load:
    """A firm demand at a bus; per-period demand is demand * profile."""

    id: str
    bus: str
    demand: float            # MW


@dataclass(frozen=True)
class TransmissionLine:
    """A line between two buses; flow is signed positive from_bus -> to_bus."""

    id: str
    from_bus: str
    to_bus: str
    capacity: float                      # MW
    reactance: float = DEFAULT_REACTANCE  # per unit

    @property
    def susceptance(self) -> float:
        return 1.0 / self.reactance


@dataclass(frozen=True)
class StorageUnit:
    """An energy store; charging draws from the bus, discharging injects."""

    id: str
    bus: str
    power_capacity: float    # MW, charge and discharge limit
    energy_capacity: float   # MWh
    efficiency: float = 1.0  # charge-side fraction in (0, 1]
    initial_charge: float = 0.0  # MWh


@dataclass(frozen=True)
class Contract:
    """A supply contract tying part of a load to a named generator."""

    id: str
    load_bus: str
    generator: str
    contracted_energy: float         # MW
    contracted_emission_rate: float  # ton CO2e/MWh


@dataclass(frozen=True)
class Network:
    """Immutable grid description shared by every solver and ledger."""

    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...] = ()
    loads: tuple[Load, ...] = ()
    lines: tuple[TransmissionLine, ...] = ()
    storage_units: tuple[StorageUnit, ...] = ()
    contracts: tuple[Contract, ...] = ()
    periods: int = 1
    load_profiles: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "loads", tuple(self.loads))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "storage_units", tuple(self.storage_units))
        object.__setattr__(self, "contracts", tuple(self.contracts))
        profiles = {
            str(k): tuple(float(x) for x in v) for k, v in dict(self.load_profiles).items()
        }
        object.__setattr__(self, "load_profiles", profiles)

    # -- lookups ---------------------------------------------------------

    def bus_ids(self) -> list[str]:
        return [b.id for b in self.buses]

    def bus_index(self) -> dict[str, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    def bus(self, bus_id: str) -> Bus:
        return self._find(self.buses, bus_id, "bus")

    def generator(self, gen_id: str) -> Generator:
        return self._find(self.generators, gen_id, "generator")

    def load(self, load_id: str) -> Load:
        return self._find(self.loads, load_id, "load")

    def line(self, line_id: str) -> TransmissionLine:
        return self._find(self.lines, line_id, "line")

    def storage_unit(self, unit_id: str) -> StorageUnit:
        return self._find(self.storage_units, unit_id, "storage unit")

    @staticmethod
    def _find(elements, element_id, kind):
        for el in elements:
            if el.id == element_id:
                return el
        raise KeyError(f"unknown {kind} {element_id!r}")

    # -- demand ----------------------------------------------------------

    def profile(self, load_id: str) -> tuple[float, ...]:
        return self.load_profiles.get(load_id, (1.0,) * self.periods)

    def load_mw(self, load: Load, period: int) -> float:
        prof = self.profile(load.id)
        multiplier = prof[period] if period < len(prof) else 1.0
        return load.demand * multiplier

    def demand_by_bus(self, period: int = 0) -> np.ndarray:
        index = self.bus_index()
        demand = np.zeros(len(self.buses))
        for load in self.loads:
            if load.bus in index:
                demand[index[load.bus]] += self.load_mw(load, period)
        return demand

    def total_demand(self, period: int = 0) -> float:
        return float(sum(self.load_mw(load, period) for load in self.loads))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    """One broken invariant, naming the offending element."""

    kind: str
    element: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.ok:
            return "network is well-formed"
        return "\n".join(f"{v.kind} {v.element}: {v.message}" for v in self.violations)


def validate(network: Network) -> ValidationReport:
    """Check every structural invariant; violations are data, not exceptions."""

    found: list[Violation] = []

    def bad(kind: str, element: str, message: str) -> None:
        found.append(Violation(kind, element, message))

    bus_ids = [b.id for b in network.buses]
    seen: set[str] = set()
    for bus_id in bus_ids:
        if bus_id in seen:
            bad("bus", bus_id, "duplicate bus id")
        seen.add(bus_id)
    buses = set(bus_ids)

    for kind, elements in (
        ("generator", network.generators),
        ("load", network.loads),
        ("line", network.lines),
        ("storage", network.storage_units),
        ("contract", network.contracts),
    ):
        ids: set[str] = set()
        for el in elements:
            if el.id in ids:
                bad(kind, el.id, f"duplicate {kind} id")
            ids.add(el.id)

    for gen in network.generators:
        if gen.bus not in buses:
            bad("generator", gen.id, f"references unknown bus {gen.bus!r}")
        if gen.capacity < 0:
            bad("generator", gen.id, f"capacity {gen.capacity} is negative")
        if gen.emission_rate < 0:
            bad("generator", gen.id, f"emission_rate {gen.emission_rate} is negative")
        if not math.isfinite(gen.marginal_cost):
            bad("generator", gen.id, f"marginal_cost {gen.marginal_cost} is not finite")

    for load in network.loads:
        if load.bus not in buses:
            bad("load", load.id, f"references unknown bus {load.bus!r}")
        if load.demand < 0:
            bad("load", load.id, f"demand {load.demand} is negative")

    for line in network.lines:
        if line.from_bus not in buses:
            bad("line", line.id, f"references unknown bus {line.from_bus!r}")
        if line.to_bus not in buses:
            bad("line", line.id, f"references unknown bus {line.to_bus!r}")
        if line.from_bus == line.to_bus:
            bad("line", line.id, f"connects bus {line.from_bus!r} to itself")
        if line.capacity <= 0:
            bad("line", line.id, f"capacity {line.capacity} must be positive")
        if line.reactance <= 0:
            bad("line", line.id, f"reactance {line.reactance} must be positive")

    demand_at_bus: dict[str, float] = {}
    for load in network.loads:
        demand_at_bus[load.bus] = demand_at_bus.get(load.bus, 0.0) + load.demand

    for unit in network.storage_units:
        if unit.bus not in buses:
            bad("storage", unit.id, f"references unknown bus {unit.bus!r}")
        if unit.power_capacity < 0:
            bad("storage", unit.id, f"power_capacity {unit.power_capacity} is negative")
        if unit.energy_capacity < 0:
            bad("storage", unit.id, f"energy_capacity {unit.energy_capacity} is negative")
        if not (0.0 < unit.efficiency <= 1.0):
            bad("storage", unit.id, f"efficiency {unit.efficiency} outside (0, 1]")
        if not (0.0 <= unit.initial_charge <= unit.energy_capacity):
            bad(
                "storage",
                unit.id,
                f"initial_charge {unit.initial_charge} outside [0, {unit.energy_capacity}]",
            )

    gens_by_id = {g.id: g for g in network.generators}
    for contract in network.contracts:
        if contract.load_bus not in buses:
            bad("contract", contract.id, f"references unknown bus {contract.load_bus!r}")
        if contract.contracted_energy < 0:
            bad("contract", contract.id, "contracted_energy is negative")
        gen = gens_by_id.get(contract.generator)
        if gen is None:
            bad("contract", contract.id, f"references unknown generator {contract.generator!r}")
        elif contract.contracted_energy > gen.capacity:
            bad(
                "contract",
                contract.id,
                f"contracted_energy {contract.contracted_energy} exceeds "
                f"generator {gen.id!r} capacity {gen.capacity}",
            )
        demand = demand_at_bus.get(contract.load_bus, 0.0)
        if contract.contracted_energy > demand:
            bad(
                "contract",
                contract.id,
                f"contracted_energy {contract.contracted_energy} exceeds "
                f"demand {demand} at bus {contract.load_bus!r}",
            )

    if network.periods < 1:
        bad("network", "periods", f"periods {network.periods} must be >= 1")
    load_ids = {l.id for l in network.loads}
    for load_id, prof in network.load_profiles.items():
        if load_id not in load_ids:
            bad("network", load_id, "load profile references unknown load")
        if len(prof) != network.periods:
            bad(
                "network",
                load_id,
                f"load profile has {len(prof)} entries for {network.periods} periods",
            )
        if any(x < 0 for x in prof):
            bad("network", load_id, "load profile has a negative multiplier")

    if len(buses) > 1:
        unreachable = _unreachable_buses(network)
        if unreachable:
            bad(
                "network",
                "connectivity",
                "buses unreachable from "
                f"{network.buses[0].id!r}: {', '.join(sorted(unreachable))}",
            )

    return ValidationReport(tuple(found))


def _unreachable_buses(network: Network) -> set[str]:
    buses = {b.id for b in network.buses}
    adjacency: dict[str, set[str]] = {b: set() for b in buses}
    for line in network.lines:
        if line.from_bus in buses and line.to_bus in buses and line.from_bus != line.to_bus:
            adjacency[line.from_bus].add(line.to_bus)
            adjacency[line.to_bus].add(line.from_bus)
    if not network.buses:
        return set()
    start = network.buses[0].id
    seen = {start}
    queue = deque([start])
    while queue:
        here = queue.popleft()
        for neighbor in adjacency[here]:
            if neighbor not in seen:
                seen.add(neighbor)
                queue.append(neighbor)
    return buses - seen


# ---------------------------------------------------------------------------
# DC power-flow algebra
# ---------------------------------------------------------------------------


def susceptance_matrix(network: Network) -> np.ndarray:
    """Nodal susceptance Laplacian: B[i,i] = sum of incident 1/x, B[i,j] = -1/x."""

    index = network.bus_index()
    n = len(network.buses)
    b_matrix = np.zeros((n, n))
    for line in network.lines:
        i, j = index[line.from_bus], index[line.to_bus]
        b = line.susceptance
        b_matrix[i, i] += b
        b_matrix[j, j] += b
        b_matrix[i, j] -= b
        b_matrix[j, i] -= b
    return b_matrix


def ptdf(network: Network, slack: str) -> np.ndarray:
    """Line sensitivities to injections withdrawn at the slack bus.

    Entry (line, bus) is the MW change on the line per 1 MW injected at the
    bus and withdrawn at ``slack``.  The slack column is identically zero.
    Raises ``NetworkStructureError`` when some buses cannot reach the slack.
    """

    index = network.bus_index()
    if slack not in index:
        raise KeyError(f"unknown bus {slack!r}")
    unreachable = _unreachable_buses(network)
    if unreachable:
        raise NetworkStructureError(
            f"buses unreachable through lines: {', '.join(sorted(unreachable))}",
            unreachable=tuple(sorted(unreachable)),
        )

    n = len(network.buses)
    n_lines = len(network.lines)
    matrix = np.zeros((n_lines, n))
    if n_lines == 0 or n == 1:
        return matrix

    slack_idx = index[slack]
    keep = [i for i in range(n) if i != slack_idx]
    reduced = susceptance_matrix(network)[np.ix_(keep, keep)]
    try:
        inverse = np.linalg.inv(reduced)
    except np.linalg.LinAlgError as exc:  # connectivity already checked; guard anyway
        raise NetworkStructureError(f"singular susceptance matrix: {exc}") from exc

    # Angles for a unit injection at bus k: theta = inverse column of k.
    theta = np.zeros((n, n))
    theta[np.ix_(keep, keep)] = inverse
    for row, line in enumerate(network.lines):
        i, j = index[line.from_bus], index[line.to_bus]
        matrix[row, :] = line.susceptance * (theta[i, :] - theta[j, :])
    matrix[:, slack_idx] = 0.0
    return matrix


def flows_from_dispatch(
    network: Network,
    injections: Mapping[str, float] | Sequence[float] | np.ndarray,
    *,
    tol: float = 1e-6,
) -> np.ndarray:
    """Signed line flows (from_bus -> to_bus positive) for balanced injections."""

    vector = _injection_vector(network, injections)
    scale = max(1.0, float(np.abs(vector).sum()))
    if abs(float(vector.sum())) > tol * scale:
        raise InjectionBalanceError(
            f"injections sum to {vector.sum():.6g} MW, expected 0"
        )
    if not network.lines:
        return np.zeros(0)
    slack = network.buses[0].id
    return ptdf(network, slack) @ vector


def _injection_vector(network: Network, injections) -> np.ndarray:
    if isinstance(injections, Mapping):
        index = network.bus_index()
        vector = np.zeros(len(network.buses))
        for bus_id, mw in injections.items():
            if bus_id not in index:
                raise KeyError(f"unknown bus {bus_id!r}")
            vector[index[bus_id]] += float(mw)
        return vector
    vector = np.asarray(injections, dtype=float)
    if vector.shape != (len(network.buses),):
        raise ValueError(
            f"expected {len(network.buses)} injections, got shape {vector.shape}"
        )
    return vector


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

_TOP_LEVEL_KEYS = {
    "buses",
    "generators",
    "loads",
    "lines",
    "storage",
    "contracts",
    "periods",
    "load_profiles",
}

# field name -> (required, coercion)
_SCHEMAS: dict[str, dict[str, tuple[bool, str]]] = {
    "buses": {"id": (True, "str"), "name": (False, "str")},
    "generators": {
        "id": (True, "str"),
        "bus": (True, "str"),
        "capacity": (True, "float"),
        "marginal_cost": (True, "float"),
        "emission_rate": (True, "float"),
    },
    "loads": {"id": (True, "str"), "bus": (True, "str"), "demand": (True, "float")},
    "lines": {
        "id": (True, "str"),
        "from_bus": (True, "str"),
        "to_bus": (True, "str"),
        "capacity": (True, "float"),
        "reactance": (False, "float"),
    },
    "storage": {
        "id": (True, "str"),
        "bus": (True, "str"),
        "power_capacity": (True, "float"),
        "energy_capacity": (True, "float"),
        "efficiency": (False, "float"),
        "initial_charge": (False, "float"),
    },
    "contracts": {
        "id": (False, "str"),
        "load_bus": (True, "str"),
        "generator": (True, "str"),
        "contracted_energy": (True, "float"),
        "contracted_emission_rate": (True, "float"),
    },
}


def parse_record(section: str, position: int, raw: Any) -> dict[str, Any]:
    """Strictly parse one JSON record; unknown fields are rejected."""

    schema = _SCHEMAS[section]
    where = f"{section}[{position}]"
    if not isinstance(raw, dict):
        raise NetworkFormatError(f"{where}: expected an object, got {type(raw).__name__}")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise NetworkFormatError(f"{where}: unknown field(s) {', '.join(unknown)}")
    record: dict[str, Any] = {}
    for name, (required, kind) in schema.items():
        if name not in raw:
            if required:
                raise NetworkFormatError(f"{where}: missing required field {name!r}")
            continue
        value = raw[name]
        if kind == "str":
            if not isinstance(value, str):
                raise NetworkFormatError(f"{where}: field {name!r} must be a string")
            record[name] = value
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise NetworkFormatError(f"{where}: field {name!r} must be a number")
            record[name] = float(value)
    return record


def network_from_dict(data: Any) -> Network:
    if not isinstance(data, dict):
        raise NetworkFormatError("network document must be a JSON object")
    unknown = sorted(set(data) - _TOP_LEVEL_KEYS)
    if unknown:
        raise NetworkFormatError(f"unknown top-level key(s): {', '.join(unknown)}")

    def records(section: str) -> list[dict[str, Any]]:
        raw = data.get(section, [])
        if not isinstance(raw, list):
            raise NetworkFormatError(f"{section!r} must be an array")
        return [parse_record(section, i, item) for i, item in enumerate(raw)]

    buses = tuple(Bus(**r) for r in records("buses"))
    generators = tuple(Generator(**r) for r in records("generators"))
    loads = tuple(Load(**r) for r in records("loads"))
    lines = tuple(TransmissionLine(**r) for r in records("lines"))
    storage = tuple(StorageUnit(**r) for r in records("storage"))
    contracts = tuple(
        Contract(**{"id": f"contract{i}", **r})
        for i, r in enumerate(records("contracts"))
    )

    periods = data.get("periods", 1)
    if isinstance(periods, bool) or not isinstance(periods, int):
        raise NetworkFormatError("'periods' must be an integer")

    raw_profiles = data.get("load_profiles", {})
    if not isinstance(raw_profiles, dict):
        raise NetworkFormatError("'load_profiles' must be an object")
    profiles: dict[str, tuple[float, ...]] = {}
    for load_id, values in raw_profiles.items():
        if not isinstance(values, list) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in values
        ):
            raise NetworkFormatError(
                f"load_profiles[{load_id!r}] must be an array of numbers"
            )
        profiles[str(load_id)] = tuple(float(v) for v in values)

    return Network(
        buses=buses,
        generators=generators,
        loads=loads,
        lines=lines,
        storage_units=storage,
        contracts=contracts,
        periods=periods,
        load_profiles=profiles,
    )


def network_to_dict(network: Network) -> dict[str, Any]:
    data: dict[str, Any] = {
        "buses": [
            {"id": b.id, **({"name": b.name} if b.name else {})} for b in network.buses
        ],
        "generators": [
            {
                "id": g.id,
                "bus": g.bus,
                "capacity": g.capacity,
                "marginal_cost": g.marginal_cost,
                "emission_rate": g.emission_rate,
            }
            for g in network.generators
        ],
        "loads": [{"id": l.id, "bus": l.bus, "demand": l.demand} for l in network.loads],
        "lines": [
            {
                "id": ln.id,
                "from_bus": ln.from_bus,
                "to_bus": ln.to_bus,
                "capacity": ln.capacity,
                "reactance": ln.reactance,
            }
            for ln in network.lines
        ],
        "storage": [
            {
                "id": s.id,
                "bus": s.bus,
                "power_capacity": s.power_capacity,
                "energy_capacity": s.energy_capacity,
                "efficiency": s.efficiency,
                "initial_charge": s.initial_charge,
            }
            for s in network.storage_units
        ],
        "contracts": [
            {
                "id": c.id,
                "load_bus": c.load_bus,
                "generator": c.generator,
                "contracted_energy": c.contracted_energy,
                "contracted_emission_rate": c.contracted_emission_rate,
            }
            for c in network.contracts
        ],
    }
    if network.periods != 1:
        data["periods"] = network.periods
    if network.load_profiles:
        data["load_profiles"] = {k: list(v) for k, v in network.load_profiles.items()}
    return data


def network_from_json(text: str) -> Network:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"invalid JSON: {exc}") from exc
    return network_from_dict(data)


def load_network(path: str | Path) -> Network:
    return network_from_json(Path(path).read_text(encoding="utf-8"))


def dump_network(network: Network, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(network_to_dict(network), indent=2) + "\n", encoding="utf-8"
    )


def contracts_from_dict(data: Any) -> tuple[Contract, ...]:
    """Parse a standalone contracts document: {"contracts": [...]}."""

    if not isinstance(data, dict):
        raise NetworkFormatError("contracts document must be a JSON object")
    unknown = sorted(set(data) - {"contracts"})
    if unknown:
        raise NetworkFormatError(f"unknown top-level key(s): {', '.join(unknown)}")
    raw = data.get("contracts", [])
    if not isinstance(raw, list):
        raise NetworkFormatError("'contracts' must be an array")
    return tuple(
        Contract(**{"id": f"contract{i}", **parse_record("contracts", i, item)})
        for i, item in enumerate(raw)
    )


def load_contracts(path: str | Path) -> tuple[Contract, ...]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"invalid JSON: {exc}") from exc
    return contracts_from_dict(data)


def with_contracts(network: Network, contracts: Iterable[Contract]) -> Network:
    """Return a copy of the network with its contracts replaced."""

    return replace(network, contracts=tuple(contracts))
