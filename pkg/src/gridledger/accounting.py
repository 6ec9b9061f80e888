"""Emissions rates and carbon-footprint ledgers, audited against Scope 1.

Three regimes allocate the grid's direct emissions:

* ``location``        - every load pays the generation-weighted average rate.
* ``market``          - contracted energy at its contract rate, the remainder
                        at the residual mix (or, incorrectly, the average).
* ``carbon-matching`` - loads pay their bus marginal rate, generators are
                        credited against theirs, lines carry the source-sink
                        rate difference, and storage nets its charge-time and
                        discharge-time rates.

A ledger's total is the sum of its element footprints; the audit compares it
to the dispatch's Scope 1 emissions.  Carbon-matching balances by a
telescoping identity over nodal energy conservation, location balances while
load equals generation, and market balances only with the residual rate.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from . import network as net
from .errors import (
    ContractViolationError,
    MissingRateError,
    StorageScheduleError,
    UndefinedRateError,
)
from .opf import DispatchSolution

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .mer import RateSet

REGIME_LOCATION = "location"
REGIME_MARKET = "market"
REGIME_MATCHING = "carbon-matching"

AUDIT_TOLERANCE = 1e-6

# Fixed export column order; anything else breaks downstream consumers.
LEDGER_COLUMNS = ("kind", "id", "period", "rate", "footprint", "regime")


@dataclass(frozen=True)
class FootprintEntry:
    """One element's footprint in one period."""

    kind: str       # load | generator | line | storage
    id: str
    period: int
    rate: float     # the rate applied to this element (ton/MWh or ton/MW)
    footprint: float  # ton/h


@dataclass
class FootprintLedger:
    """Per-element carbon footprints under one regime, summed over periods."""

    regime: str
    entries: list[FootprintEntry]
    scope1_reference: float

    @property
    def load_footprints(self) -> dict[str, float]:
        return self._sum_kind("load")

    @property
    def gen_footprints(self) -> dict[str, float]:
        return self._sum_kind("generator")

    @property
    def line_footprints(self) -> dict[str, float]:
        return self._sum_kind("line")

    @property
    def storage_footprints(self) -> dict[str, float]:
        return self._sum_kind("storage")

    def _sum_kind(self, kind: str) -> dict[str, float]:
        out: dict[str, float] = {}
        for entry in self.entries:
            if entry.kind == kind:
                out[entry.id] = out.get(entry.id, 0.0) + entry.footprint
        return out

    def category_total(self, kind: str) -> float:
        return sum(e.footprint for e in self.entries if e.kind == kind)

    @property
    def total(self) -> float:
        return sum(e.footprint for e in self.entries)

    @property
    def balance_residual(self) -> float:
        return self.total - self.scope1_reference


@dataclass(frozen=True)
class BalanceReport:
    """Outcome of auditing a ledger against Scope 1 emissions."""

    regime: str
    total: float
    scope1: float
    residual: float
    relative_residual: float
    tolerance: float
    passed: bool
    category_totals: dict[str, float]

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"audit {verdict}: ledger total {self.total:.6f} vs scope1 "
            f"{self.scope1:.6f} (residual {self.residual:+.2e})"
        )


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------


def aer(network: net.Network, solution: DispatchSolution, period: int | None = None) -> float:
    """Generation-weighted average emission rate, ton/MWh.

    ``period=None`` aggregates the whole horizon.
    """

    rates = np.array([g.emission_rate for g in network.generators])
    if period is None:
        emitted = float((rates[:, None] * solution.generation).sum())
        generated = float(solution.generation.sum())
    else:
        emitted = float(rates @ solution.generation[:, period])
        generated = float(solution.generation[:, period].sum())
    if generated <= 0.0:
        raise UndefinedRateError("average emission rate undefined: no generation")
    return emitted / generated


def residual_mix(
    network: net.Network,
    solution: DispatchSolution,
    contracts: Sequence[net.Contract] | None = None,
    period: int | None = None,
) -> float:
    """Grid emission rate after removing all contracted generation, ton/MWh."""

    contracts = network.contracts if contracts is None else tuple(contracts)
    rates = np.array([g.emission_rate for g in network.generators])
    if period is None:
        emitted = float((rates[:, None] * solution.generation).sum())
        generated = float(solution.generation.sum())
        horizon = solution.generation.shape[1]
    else:
        emitted = float(rates @ solution.generation[:, period])
        generated = float(solution.generation[:, period].sum())
        horizon = 1
    contracted_energy = horizon * sum(c.contracted_energy for c in contracts)
    contracted_emissions = horizon * sum(
        c.contracted_emission_rate * c.contracted_energy for c in contracts
    )
    remaining = generated - contracted_energy
    if remaining <= 0.0:
        raise UndefinedRateError(
            "residual mix undefined: contracts cover all generation"
        )
    return (emitted - contracted_emissions) / remaining


# ---------------------------------------------------------------------------
# Ledgers
# ---------------------------------------------------------------------------


def _zero_entries(network: net.Network, kinds: Iterable[str], periods: int) -> list[FootprintEntry]:
    elements = {
        "generator": network.generators,
        "line": network.lines,
        "storage": network.storage_units,
    }
    out = []
    for kind in kinds:
        for el in elements[kind]:
            for t in range(periods):
                out.append(FootprintEntry(kind, el.id, t, 0.0, 0.0))
    return out


def ghgp_location_ledger(network: net.Network, solution: DispatchSolution) -> FootprintLedger:
    """Location-based ledger: every load times the period's average rate."""

    entries: list[FootprintEntry] = []
    for load in network.loads:
        for t in range(network.periods):
            rate = aer(network, solution, period=t)
            mw = network.load_mw(load, t)
            entries.append(FootprintEntry("load", load.id, t, rate, rate * mw))
    entries.extend(
        _zero_entries(network, ("generator", "line", "storage"), network.periods)
    )
    return FootprintLedger(
        regime=REGIME_LOCATION,
        entries=entries,
        scope1_reference=solution.scope1_total,
    )


def ghgp_market_ledger(
    network: net.Network,
    solution: DispatchSolution,
    contracts: Sequence[net.Contract] | None = None,
    rate_mode: str = "residual",
) -> FootprintLedger:
    """Market-based ledger: contracted energy at contract rate, rest at RER.

    ``rate_mode="average"`` reproduces the known-broken variant that prices
    the uncontracted remainder at the average rate; its audit is expected to
    fail whenever contracts are cleaner than the grid average.
    """

    if rate_mode not in ("residual", "average"):
        raise ValueError("rate_mode must be 'residual' or 'average'")
    contracts = network.contracts if contracts is None else tuple(contracts)
    contracted_by_bus: dict[str, list[net.Contract]] = {}
    for contract in contracts:
        contracted_by_bus.setdefault(contract.load_bus, []).append(contract)

    entries: list[FootprintEntry] = []
    for t in range(network.periods):
        if rate_mode == "residual":
            rate = residual_mix(network, solution, contracts, period=t)
        else:
            rate = aer(network, solution, period=t)
        # Contracts attach to buses; apportion them to loads in bus order.
        remaining_by_bus = {
            bus: sum(c.contracted_energy for c in bus_contracts)
            for bus, bus_contracts in contracted_by_bus.items()
        }
        credit_by_bus = {
            bus: sum(c.contracted_emission_rate * c.contracted_energy for c in bus_contracts)
            for bus, bus_contracts in contracted_by_bus.items()
        }
        for load in network.loads:
            mw = network.load_mw(load, t)
            contracted = min(remaining_by_bus.get(load.bus, 0.0), mw)
            if remaining_by_bus.get(load.bus, 0.0) > 0:
                share = contracted / remaining_by_bus[load.bus] if remaining_by_bus[load.bus] else 0.0
                credit = credit_by_bus[load.bus] * share
                remaining_by_bus[load.bus] -= contracted
                credit_by_bus[load.bus] -= credit
            else:
                credit = 0.0
            footprint = credit + rate * (mw - contracted)
            entries.append(FootprintEntry("load", load.id, t, rate, footprint))
        for bus, leftover in remaining_by_bus.items():
            if leftover > 1e-9:
                raise ContractViolationError(
                    f"contracted energy at bus {bus!r} exceeds its demand by {leftover:.6g} MW"
                )
    entries.extend(
        _zero_entries(network, ("generator", "line", "storage"), network.periods)
    )
    return FootprintLedger(
        regime=REGIME_MARKET,
        entries=entries,
        scope1_reference=solution.scope1_total,
    )


def _bus_rates_for_period(rates, period: int) -> dict[str, float]:
    if isinstance(rates, (list, tuple)):
        for rate_set in rates:
            if rate_set.period == period:
                return {bus: rv.rate for bus, rv in rate_set.bus_mer.items()}
        raise MissingRateError(f"no rates supplied for period {period}")
    if rates.period != period:
        raise MissingRateError(f"no rates supplied for period {period}")
    return {bus: rv.rate for bus, rv in rates.bus_mer.items()}


def mer_ledger(network: net.Network, solution: DispatchSolution, rates) -> FootprintLedger:
    """Carbon-matching ledger from per-period bus marginal rates.

    Loads pay rate x load; generators earn (intensity - rate) x output; a line
    carries (source rate - sink rate) x flow with source/sink set by the
    realized direction; storage nets charge against discharge at the bus rate.
    """

    entries: list[FootprintEntry] = []
    for t in range(network.periods):
        bus_rate = _bus_rates_for_period(rates, t)

        def rate_at(bus: str) -> float:
            if bus not in bus_rate:
                raise MissingRateError(f"no marginal rate for bus {bus!r} in period {t}")
            return bus_rate[bus]

        for load in network.loads:
            rate = rate_at(load.bus)
            mw = network.load_mw(load, t)
            entries.append(FootprintEntry("load", load.id, t, rate, rate * mw))
        for i, gen in enumerate(network.generators):
            rate = rate_at(gen.bus)
            output = float(solution.generation[i, t])
            entries.append(
                FootprintEntry(
                    "generator", gen.id, t, rate, (gen.emission_rate - rate) * output
                )
            )
        for i, line in enumerate(network.lines):
            flow = float(solution.flows[i, t])
            # (source - sink) x |flow|; the signed form is direction-proof.
            spread = rate_at(line.from_bus) - rate_at(line.to_bus)
            entries.append(FootprintEntry("line", line.id, t, spread, spread * flow))
        for s, unit in enumerate(network.storage_units):
            rate = rate_at(unit.bus)
            charge = float(solution.storage_charge[s, t]) if solution.storage_charge.size else 0.0
            discharge = (
                float(solution.storage_discharge[s, t]) if solution.storage_discharge.size else 0.0
            )
            # Charging is a load at the bus rate, discharging a zero-intensity
            # generator credited against it.
            entries.append(
                FootprintEntry("storage", unit.id, t, rate, rate * (charge - discharge))
            )
    return FootprintLedger(
        regime=REGIME_MATCHING,
        entries=entries,
        scope1_reference=solution.scope1_total,
    )


# ---------------------------------------------------------------------------
# Storage
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StoragePair:
    """A matched charge/discharge parcel (periods are None for open ends)."""

    charge_period: int | None
    discharge_period: int | None
    energy: float  # MWh moved through the store
    footprint: float  # ton


@dataclass(frozen=True)
class StorageFootprintResult:
    unit: str
    total: float
    pairs: tuple[StoragePair, ...]


def storage_footprint(
    unit: net.StorageUnit,
    charge: Sequence[float],
    discharge: Sequence[float],
    rates: Sequence[float],
) -> StorageFootprintResult:
    """First-in-first-out pairing of charge and discharge energy.

    ``rates`` holds the bus marginal rate for each period.  A parcel charged
    at rate r_c and discharged at rate r_d contributes r_c * (e / efficiency)
    - r_d * e: storing when the rate is low and releasing when it is high
    earns a negative footprint.  Energy present at the start of the horizon
    has no charge-time rate and contributes only its discharge credit.
    """

    if not (len(charge) == len(discharge) == len(rates)):
        raise ValueError("charge, discharge, and rates must cover the same periods")
    parcels: list[list] = []  # [charge_period | None, soc energy]
    if unit.initial_charge > 0:
        parcels.append([None, float(unit.initial_charge)])
    total = 0.0
    pairs: list[StoragePair] = []
    for t in range(len(charge)):
        net_flow = float(charge[t]) - float(discharge[t])
        if net_flow > 0:
            parcels.append([t, net_flow * unit.efficiency])
        elif net_flow < 0:
            need = -net_flow
            while need > 1e-12:
                if not parcels:
                    raise StorageScheduleError(
                        f"storage {unit.id!r} discharges {need:.6g} MWh never stored"
                    )
                t_charge, available = parcels[0]
                drawn = min(available, need)
                charge_rate = rates[t_charge] if t_charge is not None else None
                footprint = -rates[t] * drawn
                if charge_rate is not None:
                    footprint += charge_rate * (drawn / unit.efficiency)
                pairs.append(StoragePair(t_charge, t, drawn, footprint))
                total += footprint
                need -= drawn
                if available - drawn <= 1e-12:
                    parcels.pop(0)
                else:
                    parcels[0][1] = available - drawn
    # Energy still parked at the end of the horizon was bought at its
    # charge-time rate; keep it on the books so the ledger views agree.
    for t_charge, energy in parcels:
        if t_charge is None:
            continue
        footprint = rates[t_charge] * (energy / unit.efficiency)
        pairs.append(StoragePair(t_charge, None, energy, footprint))
        total += footprint
    return StorageFootprintResult(unit=unit.id, total=total, pairs=tuple(pairs))


# ---------------------------------------------------------------------------
# Audit and export
# ---------------------------------------------------------------------------


def audit_balance(
    ledger: FootprintLedger,
    scope1: float | None = None,
    tolerance: float = AUDIT_TOLERANCE,
) -> BalanceReport:
    """Compare the ledger total to Scope 1 emissions at a relative tolerance."""

    reference = ledger.scope1_reference if scope1 is None else scope1
    total = ledger.total
    residual = total - reference
    scale = max(1.0, abs(reference))
    relative = residual / scale
    return BalanceReport(
        regime=ledger.regime,
        total=total,
        scope1=reference,
        residual=residual,
        relative_residual=relative,
        tolerance=tolerance,
        passed=abs(relative) <= tolerance,
        category_totals={
            "loads": ledger.category_total("load"),
            "generators": ledger.category_total("generator"),
            "lines": ledger.category_total("line"),
            "storage": ledger.category_total("storage"),
        },
    )


def ledger_records(ledger: FootprintLedger) -> list[tuple]:
    """Rows in the fixed export order: kind, id, period, rate, footprint, regime."""

    return [
        (e.kind, e.id, e.period, e.rate, e.footprint, ledger.regime)
        for e in ledger.entries
    ]


def ledger_to_csv(ledger: FootprintLedger) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(LEDGER_COLUMNS)
    for row in ledger_records(ledger):
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


def ledger_to_dict(ledger: FootprintLedger) -> dict:
    return {
        "regime": ledger.regime,
        "records": [
            dict(zip(LEDGER_COLUMNS, row)) for row in ledger_records(ledger)
        ],
        "category_totals": {
            "loads": ledger.category_total("load"),
            "generators": ledger.category_total("generator"),
            "lines": ledger.category_total("line"),
            "storage": ledger.category_total("storage"),
        },
        "total": ledger.total,
        "scope1": ledger.scope1_reference,
        "balance_residual": ledger.balance_residual,
    }
