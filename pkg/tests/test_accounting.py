import numpy as np
import pytest

from netgen import random_network

from gridledger import accounting as acc
from gridledger.errors import (
    ContractViolationError,
    MissingRateError,
    StorageScheduleError,
    UndefinedRateError,
)
from gridledger.mer import RateSet, RateValue, rate_profile
from gridledger.network import Bus, Contract, Generator, Load, Network, StorageUnit
from gridledger.opf import solve_dcopf


def rates_from(mapping, period=0):
    return RateSet(
        period=period,
        bus_mer={k: RateValue(v, v, v) for k, v in mapping.items()},
    )


# -- AER / RER -----------------------------------------------------------------


def test_aer_three_bus(three_bus, three_bus_solution):
    assert acc.aer(three_bus, three_bus_solution) == pytest.approx(0.6, abs=1e-6)


def test_aer_expansion_case(three_bus):
    from gridledger.fixtures import load_scenario_fixture
    from gridledger.scenario import apply_delta

    expanded = apply_delta(three_bus, load_scenario_fixture("expansion_5mw"))
    sol = solve_dcopf(expanded)
    assert acc.aer(expanded, sol) == pytest.approx(0.72, abs=1e-6)


def test_aer_all_clean_is_zero(single_bus_clean):
    sol = solve_dcopf(single_bus_clean)
    assert acc.aer(single_bus_clean, sol) == 0.0


def test_aer_undefined_without_generation():
    net = Network(buses=(Bus("b"),), generators=(Generator("g", "b", 5.0, 1.0, 0.1),))
    sol = solve_dcopf(net)
    with pytest.raises(UndefinedRateError):
        acc.aer(net, sol)


def test_residual_mix_responsiveness(responsiveness_after):
    sol = solve_dcopf(responsiveness_after)
    assert acc.residual_mix(responsiveness_after, sol) == pytest.approx(1 / 3, abs=1e-6)


def test_residual_mix_without_contracts_equals_aer(three_bus, three_bus_solution):
    assert acc.residual_mix(three_bus, three_bus_solution, contracts=()) == pytest.approx(
        acc.aer(three_bus, three_bus_solution)
    )


def test_residual_mix_contracts_at_average_rate(three_bus, three_bus_solution):
    average = acc.aer(three_bus, three_bus_solution)
    contracts = (Contract("c", "bus3", "fossil1", 10.0, average),)
    assert acc.residual_mix(three_bus, three_bus_solution, contracts) == pytest.approx(
        average, abs=1e-9
    )


def test_residual_mix_undefined_when_fully_contracted(responsiveness_after):
    sol = solve_dcopf(responsiveness_after)
    contracts = (Contract("c", "bus3", "clean1", 80.0, 0.0), Contract("c2", "bus4", "gas2", 20.0, 0.0))
    with pytest.raises(UndefinedRateError):
        acc.residual_mix(responsiveness_after, sol, contracts)


# -- location ledger --------------------------------------------------------------


def test_location_ledger_responsiveness(responsiveness_after):
    sol = solve_dcopf(responsiveness_after)
    ledger = acc.ghgp_location_ledger(responsiveness_after, sol)
    assert ledger.load_footprints["town3"] == pytest.approx(8.0, abs=1e-6)
    assert ledger.load_footprints["new4"] == pytest.approx(2.0, abs=1e-6)
    assert acc.audit_balance(ledger).passed


def test_location_ledger_three_bus_balances(three_bus, three_bus_solution):
    ledger = acc.ghgp_location_ledger(three_bus, three_bus_solution)
    assert ledger.load_footprints["load3"] == pytest.approx(27.0, abs=1e-6)
    assert ledger.balance_residual == pytest.approx(0.0, abs=1e-9)
    assert ledger.category_total("generator") == 0.0


def test_location_ledger_zero_emission_grid(single_bus_clean):
    sol = solve_dcopf(single_bus_clean)
    ledger = acc.ghgp_location_ledger(single_bus_clean, sol)
    assert ledger.total == 0.0


# -- market ledger -----------------------------------------------------------------


def test_market_ledger_residual_mode(responsiveness_after):
    sol = solve_dcopf(responsiveness_after)
    ledger = acc.ghgp_market_ledger(responsiveness_after, sol)
    assert ledger.load_footprints["town3"] == pytest.approx(10 / 3, abs=1e-6)
    assert ledger.load_footprints["new4"] == pytest.approx(20 / 3, abs=1e-6)
    assert acc.audit_balance(ledger).passed


def test_market_ledger_without_contracts_equals_location(three_bus, three_bus_solution):
    market = acc.ghgp_market_ledger(three_bus, three_bus_solution, contracts=())
    location = acc.ghgp_location_ledger(three_bus, three_bus_solution)
    assert market.load_footprints == pytest.approx(location.load_footprints)


def test_market_ledger_average_mode_undercounts(responsiveness_after):
    sol = solve_dcopf(responsiveness_after)
    ledger = acc.ghgp_market_ledger(responsiveness_after, sol, rate_mode="average")
    report = acc.audit_balance(ledger)
    assert not report.passed
    assert report.residual == pytest.approx(-7.0, abs=1e-6)  # 70 MW clean at AER 0.1


def test_market_ledger_contract_above_demand_rejected(responsiveness_after):
    sol = solve_dcopf(responsiveness_after)
    contracts = (Contract("big", "bus4", "clean1", 90.0, 0.0),)
    with pytest.raises(ContractViolationError):
        acc.ghgp_market_ledger(responsiveness_after, sol, contracts)


# -- carbon-matching ledger -----------------------------------------------------------


def test_mer_ledger_three_bus_category_totals(three_bus, three_bus_solution):
    profile = rate_profile(three_bus, base=three_bus_solution)
    ledger = acc.mer_ledger(three_bus, three_bus_solution, profile)
    assert ledger.category_total("load") == pytest.approx(81.0, abs=1e-6)
    assert ledger.category_total("generator") == pytest.approx(0.0, abs=1e-6)
    assert ledger.category_total("line") == pytest.approx(-54.0, abs=1e-6)
    assert ledger.total == pytest.approx(27.0, abs=1e-6)


def test_mer_ledger_three_bus_per_line(three_bus, three_bus_solution):
    profile = rate_profile(three_bus, base=three_bus_solution)
    ledger = acc.mer_ledger(three_bus, three_bus_solution, profile)
    assert ledger.line_footprints["line12"] == pytest.approx(4.5, abs=1e-6)
    assert ledger.line_footprints["line23"] == pytest.approx(-36.0, abs=1e-6)
    assert ledger.line_footprints["line13"] == pytest.approx(-22.5, abs=1e-6)


def test_mer_ledger_responsiveness(responsiveness_after):
    sol = solve_dcopf(responsiveness_after)
    profile = rate_profile(responsiveness_after, base=sol, include_lines=False, include_generators=False)
    ledger = acc.mer_ledger(responsiveness_after, sol, profile)
    assert ledger.category_total("load") == pytest.approx(100.0, abs=1e-6)
    assert ledger.gen_footprints["clean1"] == pytest.approx(-90.0, abs=1e-6)
    assert ledger.gen_footprints["gas2"] == pytest.approx(0.0, abs=1e-6)
    assert ledger.total == pytest.approx(sol.scope1_total, abs=1e-6)


def test_mer_ledger_line_footprint_ignores_nominal_orientation(three_bus, three_bus_solution):
    import dataclasses

    flipped_lines = tuple(
        dataclasses.replace(l, from_bus=l.to_bus, to_bus=l.from_bus) if l.id == "line13" else l
        for l in three_bus.lines
    )
    flipped = dataclasses.replace(three_bus, lines=flipped_lines)
    sol = solve_dcopf(flipped)
    profile = rate_profile(flipped, base=sol)
    ledger = acc.mer_ledger(flipped, sol, profile)
    assert ledger.line_footprints["line13"] == pytest.approx(-22.5, abs=1e-6)


def test_mer_ledger_missing_rate_raises(three_bus, three_bus_solution):
    partial = rates_from({"bus1": 0.9, "bus2": 0.0})  # bus3 missing
    with pytest.raises(MissingRateError):
        acc.mer_ledger(three_bus, three_bus_solution, partial)


def test_constant_rate_ledger_needs_no_line_terms(synth_ercot20):
    # With one uniform rate, line spreads vanish and loads+generators carry
    # the whole budget.
    sol = solve_dcopf(synth_ercot20)
    uniform = rates_from({b.id: 0.5 for b in synth_ercot20.buses})
    ledger = acc.mer_ledger(synth_ercot20, sol, uniform)
    assert ledger.category_total("line") == pytest.approx(0.0, abs=1e-9)
    assert ledger.total == pytest.approx(sol.scope1_total, abs=1e-6)


def test_loads_overpay_and_generators_credit_when_marginal_exceeds_average(
    responsiveness_after,
):
    sol = solve_dcopf(responsiveness_after)
    profile = rate_profile(responsiveness_after, base=sol, include_lines=False, include_generators=False)
    average = acc.aer(responsiveness_after, sol)
    assert all(v.rate > average for v in profile[0].bus_mer.values())
    ledger = acc.mer_ledger(responsiveness_after, sol, profile)
    assert ledger.category_total("load") > sol.scope1_total
    assert ledger.category_total("generator") < 0.0


# -- storage ---------------------------------------------------------------------


def test_storage_footprint_low_to_high(storage_two_period):
    unit = storage_two_period.storage_units[0]
    result = acc.storage_footprint(unit, [10.0, 0.0], [0.0, 10.0], [0.0, 1.0])
    assert result.total == pytest.approx(-10.0, abs=1e-9)
    assert result.pairs[0].charge_period == 0
    assert result.pairs[0].discharge_period == 1


def test_storage_footprint_equal_rates_is_zero(storage_two_period):
    unit = storage_two_period.storage_units[0]
    result = acc.storage_footprint(unit, [10.0, 0.0], [0.0, 10.0], [0.4, 0.4])
    assert result.total == pytest.approx(0.0, abs=1e-12)


def test_storage_footprint_idle_is_zero(storage_two_period):
    unit = storage_two_period.storage_units[0]
    result = acc.storage_footprint(unit, [0.0, 0.0], [0.0, 0.0], [0.0, 1.0])
    assert result.total == 0.0
    assert result.pairs == ()


def test_storage_footprint_unmatched_discharge_rejected(storage_two_period):
    unit = storage_two_period.storage_units[0]
    with pytest.raises(StorageScheduleError):
        acc.storage_footprint(unit, [0.0, 0.0], [0.0, 5.0], [0.0, 1.0])


def test_storage_footprint_initial_charge_discharges_free():
    unit = StorageUnit("s", "b", 10.0, 10.0, efficiency=1.0, initial_charge=5.0)
    result = acc.storage_footprint(unit, [0.0, 0.0], [0.0, 5.0], [0.2, 1.0])
    assert result.total == pytest.approx(-5.0)
    assert result.pairs[0].charge_period is None


def test_storage_footprint_matches_ledger_on_fixture(storage_two_period):
    sol = solve_dcopf(storage_two_period)
    profile = rate_profile(storage_two_period, base=sol, include_lines=False, include_generators=False)
    ledger = acc.mer_ledger(storage_two_period, sol, profile)
    unit = storage_two_period.storage_units[0]
    fifo = acc.storage_footprint(
        unit,
        sol.storage_charge[0],
        sol.storage_discharge[0],
        [p.bus_rate("hub") for p in profile],
    )
    assert fifo.total == pytest.approx(ledger.storage_footprints["battery"], abs=1e-9)
    assert fifo.total == pytest.approx(-10.0, abs=1e-6)


def test_temporal_balance_with_storage(storage_two_period):
    sol = solve_dcopf(storage_two_period)
    profile = rate_profile(storage_two_period, base=sol, include_lines=False, include_generators=False)
    ledger = acc.mer_ledger(storage_two_period, sol, profile)
    assert ledger.total == pytest.approx(sol.scope1_total, abs=1e-6)


# -- audit ------------------------------------------------------------------------


def test_audit_pass_three_bus(three_bus, three_bus_solution):
    profile = rate_profile(three_bus, base=three_bus_solution)
    report = acc.audit_balance(acc.mer_ledger(three_bus, three_bus_solution, profile))
    assert report.passed
    assert report.residual == pytest.approx(0.0, abs=1e-6)
    assert report.category_totals["loads"] == pytest.approx(81.0, abs=1e-6)


def test_audit_empty_network_passes():
    net = Network(buses=(Bus("b"),))
    sol = solve_dcopf(net)
    empty = acc.FootprintLedger(
        regime="carbon-matching", entries=[], scope1_reference=sol.scope1_total
    )
    assert acc.audit_balance(empty).passed


def test_audit_tolerance_override(responsiveness_after):
    sol = solve_dcopf(responsiveness_after)
    ledger = acc.ghgp_market_ledger(responsiveness_after, sol, rate_mode="average")
    assert not acc.audit_balance(ledger).passed
    assert acc.audit_balance(ledger, tolerance=10.0).passed


# -- randomized balance properties ---------------------------------------------------


def test_balance_identities_on_random_networks():
    rng = np.random.default_rng(2025)
    for _ in range(12):
        net = random_network(rng, max_buses=10, max_gens=6, with_contracts=True)
        sol = solve_dcopf(net)
        profile = rate_profile(net, base=sol, include_lines=False, include_generators=False)
        if profile[0].errors:
            continue
        scale = max(1.0, sol.scope1_total)
        location = acc.ghgp_location_ledger(net, sol)
        assert abs(location.balance_residual) <= 1e-6 * scale
        matching = acc.mer_ledger(net, sol, profile)
        assert abs(matching.balance_residual) <= 1e-6 * scale
        market = acc.ghgp_market_ledger(net, sol)
        assert abs(market.balance_residual) <= 1e-6 * scale


# -- export -----------------------------------------------------------------------


def test_ledger_records_order_and_shape(three_bus, three_bus_solution):
    profile = rate_profile(three_bus, base=three_bus_solution)
    ledger = acc.mer_ledger(three_bus, three_bus_solution, profile)
    records = acc.ledger_records(ledger)
    kinds = [r[0] for r in records]
    assert kinds == ["load", "generator", "generator", "line", "line", "line"]
    assert all(len(r) == 6 for r in records)
    assert records[0][:3] == ("load", "load3", 0)


def test_ledger_csv_deterministic(three_bus, three_bus_solution):
    profile = rate_profile(three_bus, base=three_bus_solution)
    ledger = acc.mer_ledger(three_bus, three_bus_solution, profile)
    first = acc.ledger_to_csv(ledger)
    second = acc.ledger_to_csv(acc.mer_ledger(three_bus, three_bus_solution, profile))
    assert first == second
    assert first.splitlines()[0] == "kind,id,period,rate,footprint,regime"


def test_ledger_dict_round_trips_to_json(three_bus, three_bus_solution):
    import json

    profile = rate_profile(three_bus, base=three_bus_solution)
    ledger = acc.mer_ledger(three_bus, three_bus_solution, profile)
    payload = acc.ledger_to_dict(ledger)
    again = json.loads(json.dumps(payload))
    assert again["total"] == pytest.approx(27.0, abs=1e-6)
    assert len(again["records"]) == len(ledger.entries)
