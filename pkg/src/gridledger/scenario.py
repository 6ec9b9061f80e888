"""What-if evaluation: apply structural changes, re-solve, compare ledgers.

A scenario is a list of deltas: increment or set a numeric field of an
existing element, or add a new element.  Evaluation reports the before and
after dispatch, rates, and ledgers, plus the decision-time prediction of the
emissions change (base-case marginal rate times the load change) against the
realized change.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import network as net
from .accounting import (
    FootprintLedger,
    aer,
    ghgp_location_ledger,
    ghgp_market_ledger,
    mer_ledger,
)
from .errors import (
    NetworkFormatError,
    OPFInfeasibleError,
    RateUnavailableError,
    ScenarioError,
    ScenarioInfeasibleError,
    UndefinedRateError,
)
from .mer import (
    Perturbation,
    RateSet,
    bus_mer,
    gen_capacity_mer,
    line_mer,
    rate_profile,
)
from .opf import DispatchSolution, solve_dcopf

PREDICTION_TOLERANCE = 1e-6

_SECTION_BY_KIND = {
    "bus": "buses",
    "generator": "generators",
    "load": "loads",
    "line": "lines",
    "storage": "storage",
    "contract": "contracts",
}

_EDITABLE_FIELDS = {
    "generator": {"capacity", "marginal_cost", "emission_rate"},
    "load": {"demand"},
    "line": {"capacity", "reactance"},
    "storage": {"power_capacity", "energy_capacity", "efficiency", "initial_charge"},
    "contract": {"contracted_energy", "contracted_emission_rate"},
}

_CLASS_BY_KIND = {
    "bus": net.Bus,
    "generator": net.Generator,
    "load": net.Load,
    "line": net.TransmissionLine,
    "storage": net.StorageUnit,
    "contract": net.Contract,
}


@dataclass(frozen=True)
class Change:
    """One structural edit: a field update or a new element."""

    kind: str
    id: str | None = None
    field: str | None = None
    increment: float | None = None
    set_to: float | None = None
    new: Mapping[str, Any] | None = None

    def __post_init__(self):
        if self.kind not in _SECTION_BY_KIND:
            raise ScenarioError(f"unknown element kind {self.kind!r}")
        if self.new is not None:
            if self.id or self.field or self.increment is not None or self.set_to is not None:
                raise ScenarioError("a new-element change takes no other fields")
            return
        if not self.id or not self.field:
            raise ScenarioError("an edit needs an element id and a field")
        if self.field not in _EDITABLE_FIELDS.get(self.kind, set()):
            raise ScenarioError(f"field {self.field!r} of {self.kind} is not editable")
        if (self.increment is None) == (self.set_to is None):
            raise ScenarioError("an edit needs exactly one of increment or set")


@dataclass(frozen=True)
class ScenarioDelta:
    changes: tuple[Change, ...] = ()


def apply_delta(network: net.Network, delta: ScenarioDelta) -> net.Network:
    """Return the modified network; the result must pass validation."""

    collections = {
        "bus": list(network.buses),
        "generator": list(network.generators),
        "load": list(network.loads),
        "line": list(network.lines),
        "storage": list(network.storage_units),
        "contract": list(network.contracts),
    }
    for change in delta.changes:
        pool = collections[change.kind]
        if change.new is not None:
            section = _SECTION_BY_KIND[change.kind]
            record = net.parse_record(section, len(pool), dict(change.new))
            if change.kind == "contract" and "id" not in record:
                record["id"] = f"contract{len(pool)}"
            pool.append(_CLASS_BY_KIND[change.kind](**record))
            continue
        position = next((i for i, el in enumerate(pool) if el.id == change.id), None)
        if position is None:
            raise ScenarioError(f"no {change.kind} with id {change.id!r}")
        element = pool[position]
        current = getattr(element, change.field)
        value = change.set_to if change.set_to is not None else current + change.increment
        if not math.isfinite(value):
            raise ScenarioError(f"{change.kind} {change.id!r}: {change.field} would become {value}")
        pool[position] = replace(element, **{change.field: value})

    modified = net.Network(
        buses=tuple(collections["bus"]),
        generators=tuple(collections["generator"]),
        loads=tuple(collections["load"]),
        lines=tuple(collections["line"]),
        storage_units=tuple(collections["storage"]),
        contracts=tuple(collections["contract"]),
        periods=network.periods,
        load_profiles=dict(network.load_profiles),
    )
    report = net.validate(modified)
    if not report.ok:
        raise ScenarioError(f"delta produces an invalid network: {report.summary()}")
    return modified


# ---------------------------------------------------------------------------
# Scenario file format
# ---------------------------------------------------------------------------


def scenario_from_dict(data: Any) -> ScenarioDelta:
    if not isinstance(data, dict):
        raise NetworkFormatError("scenario document must be a JSON object")
    unknown = sorted(set(data) - {"deltas"})
    if unknown:
        raise NetworkFormatError(f"unknown top-level key(s): {', '.join(unknown)}")
    raw = data.get("deltas", [])
    if not isinstance(raw, list):
        raise NetworkFormatError("'deltas' must be an array")
    changes = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise NetworkFormatError(f"deltas[{i}]: expected an object")
        allowed = {"kind", "id", "field", "increment", "set", "new"}
        unknown = sorted(set(item) - allowed)
        if unknown:
            raise NetworkFormatError(f"deltas[{i}]: unknown field(s) {', '.join(unknown)}")
        if "kind" not in item:
            raise NetworkFormatError(f"deltas[{i}]: missing 'kind'")
        try:
            changes.append(
                Change(
                    kind=item["kind"],
                    id=item.get("id"),
                    field=item.get("field"),
                    increment=item.get("increment"),
                    set_to=item.get("set"),
                    new=item.get("new"),
                )
            )
        except ScenarioError as exc:
            raise NetworkFormatError(f"deltas[{i}]: {exc}") from exc
    return ScenarioDelta(changes=tuple(changes))


def load_scenario(path: str | Path) -> ScenarioDelta:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"invalid JSON: {exc}") from exc
    return scenario_from_dict(data)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass
class CaseReport:
    """Solved state of one network: dispatch, rates, and ledgers per regime."""

    network: net.Network
    solution: DispatchSolution
    rates: list[RateSet]
    ledgers: dict[str, FootprintLedger] = field(default_factory=dict)

    @property
    def scope1(self) -> float:
        return self.solution.scope1_total

    @property
    def aer(self) -> float | None:
        try:
            return aer(self.network, self.solution)
        except UndefinedRateError:
            return None


@dataclass
class BeforeAfterReport:
    base: CaseReport
    modified: CaseReport
    scope1_delta: float
    predicted_delta: float

    @property
    def prediction_exact(self) -> bool:
        return abs(self.scope1_delta - self.predicted_delta) <= PREDICTION_TOLERANCE


def _case(network: net.Network, epsilon: float) -> CaseReport:
    solution = solve_dcopf(network)
    rates = rate_profile(
        network, epsilon=epsilon, include_lines=True, include_generators=False,
        base=solution,
    )
    ledgers = {
        "location": ghgp_location_ledger(network, solution),
        "carbon-matching": mer_ledger(network, solution, rates),
    }
    if network.contracts:
        ledgers["market"] = ghgp_market_ledger(network, solution)
    return CaseReport(network=network, solution=solution, rates=rates, ledgers=ledgers)


def _predicted_delta(
    base: CaseReport, network: net.Network, delta: ScenarioDelta
) -> float:
    """Decision-time signal: base marginal rate times each load change."""

    predicted = 0.0
    for change in delta.changes:
        if change.kind != "load":
            continue
        if change.new is not None:
            record = dict(change.new)
            bus = record.get("bus")
            demand_change = float(record.get("demand", 0.0))
            profile = (1.0,) * network.periods
        else:
            load = network.load(change.id)
            bus = load.bus
            if change.field != "demand":
                continue
            demand_change = (
                change.set_to - load.demand
                if change.set_to is not None
                else change.increment
            )
            profile = network.profile(load.id)
        for t, rates in enumerate(base.rates):
            if bus in rates.bus_mer:
                multiplier = profile[t] if t < len(profile) else 1.0
                predicted += rates.bus_rate(bus) * demand_change * multiplier
    return predicted


def evaluate(
    network: net.Network,
    delta: ScenarioDelta,
    *,
    epsilon: float = 0.01,
) -> BeforeAfterReport:
    """Solve base and modified networks and report footprints and deltas."""

    base = _case(network, epsilon)
    modified_network = apply_delta(network, delta)
    try:
        modified = _case(modified_network, epsilon)
    except OPFInfeasibleError as exc:
        raise ScenarioInfeasibleError(exc.certificate) from exc
    return BeforeAfterReport(
        base=base,
        modified=modified,
        scope1_delta=modified.scope1 - base.scope1,
        predicted_delta=_predicted_delta(base, network, delta),
    )


# ---------------------------------------------------------------------------
# Expansion ranking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpansionCandidate:
    kind: str  # "line" or "generator"
    id: str

    def __post_init__(self):
        if self.kind not in ("line", "generator"):
            raise ScenarioError(f"expansion kind must be line or generator, got {self.kind!r}")


@dataclass(frozen=True)
class RankedExpansion:
    candidate: ExpansionCandidate
    rate: float | None  # ton per MW of expansion; None when errored
    error: str | None = None


def rank_expansions(
    network: net.Network,
    candidates: Sequence[ExpansionCandidate],
    step: float = 1.0,
    *,
    base: DispatchSolution | None = None,
) -> list[RankedExpansion]:
    """Candidates ordered most emissions-reducing first.

    Per-candidate failures ride along in the ranking rather than aborting it.
    The ordering does not depend on the input order.
    """

    base = base if base is not None else solve_dcopf(network)
    pert = Perturbation(epsilon=step, direction="forward")
    ranked: list[RankedExpansion] = []
    for candidate in candidates:
        try:
            if candidate.kind == "line":
                value = line_mer(network, candidate.id, pert, base=base)
            else:
                value = gen_capacity_mer(network, candidate.id, pert, base=base)
            ranked.append(RankedExpansion(candidate, value.rate))
        except (RateUnavailableError, KeyError) as exc:
            ranked.append(RankedExpansion(candidate, None, error=str(exc)))
    ranked.sort(
        key=lambda r: (
            r.rate is None,
            r.rate if r.rate is not None else 0.0,
            r.candidate.kind,
            r.candidate.id,
        )
    )
    return ranked


# ---------------------------------------------------------------------------
# Energy-per-ton comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TonBudget:
    """How much energy one ton of emissions buys under each framework."""

    bus: str
    budget: float  # tons
    aer_rate: float
    mer_rate: float
    aer_mwh: float  # inf when the average rate is zero
    mer_mwh: float

    @property
    def aer_unlimited(self) -> bool:
        return math.isinf(self.aer_mwh)

    @property
    def mer_unlimited(self) -> bool:
        return math.isinf(self.mer_mwh)


def ton_budget(
    network: net.Network,
    bus: str,
    budget: float,
    *,
    base: DispatchSolution | None = None,
    rates: RateSet | None = None,
    period: int = 0,
) -> TonBudget:
    """Energy equivalent of an emissions budget under average and marginal views."""

    if budget < 0:
        raise ValueError("budget must be nonnegative")
    if bus not in network.bus_index():
        raise KeyError(f"unknown bus {bus!r}")
    base = base if base is not None else solve_dcopf(network)
    average = aer(network, base, period=period)
    if rates is not None and bus in rates.bus_mer:
        marginal = rates.bus_rate(bus)
    else:
        marginal = bus_mer(network, bus, period=period, base=base).rate

    def quota(rate: float) -> float:
        if budget == 0.0:
            return 0.0
        if rate <= 0.0:
            return math.inf  # unlimited under this regime
        return budget / rate

    return TonBudget(
        bus=bus,
        budget=budget,
        aer_rate=average,
        mer_rate=marginal,
        aer_mwh=quota(average),
        mer_mwh=quota(marginal),
    )
