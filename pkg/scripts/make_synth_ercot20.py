#!/usr/bin/env python3
"""Build and verify the bundled 20-bus synthetic grid.

The grid is a stylized two-zone system: a wind-heavy, cheap west zone and a
fossil-heavy, load-heavy east zone joined by a deliberately tight corridor.
The script checks the properties the test suite relies on before writing the
fixture: the dispatch is feasible, at least one corridor line is congested
with a strictly negative marginal emissions rate, and that line tops the
expansion ranking.

Run from the repository root:

    python3 scripts/make_synth_ercot20.py
"""

from __future__ import annotations

import sys
from pathlib import Path

from gridledger import accounting as acc
from gridledger import mer
from gridledger import scenario as scn
from gridledger.network import (
    Bus,
    Generator,
    Load,
    Network,
    TransmissionLine,
    dump_network,
    validate,
)
from gridledger.opf import solve_dcopf

OUT = Path(__file__).resolve().parents[1] / "src" / "gridledger" / "fixtures" / "synth_ercot20.json"

FLOW_TOL = 1e-6


def build() -> Network:
    buses = [Bus(f"w{i:02d}", name=f"West {i}") for i in range(1, 9)]
    buses += [Bus(f"e{i:02d}", name=f"East {i}") for i in range(1, 13)]

    generators = [
        Generator("wind_w01", "w01", 300.0, 6.0, 0.0),
        Generator("wind_w02", "w02", 250.0, 7.0, 0.0),
        Generator("wind_w03", "w03", 200.0, 5.0, 0.0),
        Generator("wind_w04", "w04", 150.0, 8.0, 0.0),
        Generator("wind_w06", "w06", 100.0, 9.0, 0.0),
        Generator("gas_e01", "e01", 250.0, 45.0, 0.45),
        Generator("coal_e02", "e02", 200.0, 38.0, 1.0),
        Generator("gas_e04", "e04", 180.0, 55.0, 0.5),
        Generator("peaker_e07", "e07", 120.0, 85.0, 0.62),
    ]

    loads = [
        Load("load_w01", "w01", 20.0),
        Load("load_w03", "w03", 15.0),
        Load("load_w05", "w05", 25.0),
        Load("load_e03", "e03", 120.0),
        Load("load_e04", "e04", 140.0),
        Load("load_e05", "e05", 110.0),
        Load("load_e06", "e06", 90.0),
        Load("load_e07", "e07", 130.0),
        Load("load_e08", "e08", 100.0),
        Load("load_e09", "e09", 80.0),
        Load("load_e10", "e10", 70.0),
        Load("load_e11", "e11", 60.0),
        Load("load_e12", "e12", 50.0),
    ]

    def line(i, a, b, cap, x):
        return TransmissionLine(f"l{i:02d}_{a}_{b}", a, b, cap, x)

    lines = [
        # west mesh
        line(1, "w01", "w02", 600.0, 1.0),
        line(2, "w02", "w03", 600.0, 1.1),
        line(3, "w03", "w04", 600.0, 0.9),
        line(4, "w04", "w05", 600.0, 1.0),
        line(5, "w05", "w06", 600.0, 1.2),
        line(6, "w06", "w07", 600.0, 1.0),
        line(7, "w07", "w08", 600.0, 0.8),
        line(8, "w01", "w07", 600.0, 1.3),
        line(9, "w02", "w08", 600.0, 1.1),
        # the west-east corridor: the only ties between the zones
        line(10, "w08", "e01", 150.0, 1.0),
        line(11, "w07", "e02", 100.0, 1.2),
        # east mesh
        line(12, "e01", "e02", 500.0, 1.0),
        line(13, "e01", "e03", 500.0, 0.9),
        line(14, "e02", "e04", 500.0, 1.0),
        line(15, "e03", "e05", 500.0, 1.1),
        line(16, "e04", "e06", 500.0, 1.0),
        line(17, "e05", "e07", 500.0, 0.9),
        line(18, "e06", "e08", 500.0, 1.0),
        line(19, "e07", "e09", 500.0, 1.2),
        line(20, "e08", "e10", 500.0, 1.0),
        line(21, "e09", "e11", 500.0, 1.0),
        line(22, "e10", "e12", 500.0, 0.9),
        line(23, "e03", "e04", 500.0, 1.0),
        line(24, "e05", "e06", 500.0, 1.0),
        line(25, "e09", "e10", 500.0, 1.1),
        line(26, "e11", "e12", 500.0, 1.0),
    ]

    return Network(
        buses=tuple(buses),
        generators=tuple(generators),
        loads=tuple(loads),
        lines=tuple(lines),
    )


def verify(network: Network) -> list[str]:
    problems = []
    report = validate(network)
    if not report.ok:
        return [f"validation: {report.summary()}"]
    solution = solve_dcopf(network)
    if solution.scope1_total <= 0:
        problems.append("expected fossil dispatch east of the corridor")

    congested = [
        network.lines[i].id
        for i in range(len(network.lines))
        if abs(abs(solution.flows[i, 0]) - network.lines[i].capacity) <= FLOW_TOL
    ]
    if not congested:
        problems.append("no congested line")

    candidates = [scn.ExpansionCandidate("line", l.id) for l in network.lines]
    ranking = scn.rank_expansions(network, candidates, step=1.0, base=solution)
    top = ranking[0]
    if top.rate is None or top.rate >= 0:
        problems.append(f"top-ranked line {top.candidate.id} has rate {top.rate}")
    if top.candidate.id not in congested:
        problems.append(f"top-ranked line {top.candidate.id} is not congested")

    rates = mer.rate_profile(network, base=solution, include_generators=False)
    ledger = acc.mer_ledger(network, solution, rates)
    audit = acc.audit_balance(ledger)
    if not audit.passed:
        problems.append(f"ledger does not balance: {audit.summary()}")

    print(f"scope1 = {solution.scope1_total:.3f} ton/h, cost = {solution.total_cost:.0f} $/h")
    print(f"congested lines: {', '.join(congested)}")
    print("top expansions:")
    for entry in ranking[:4]:
        print(f"  {entry.candidate.id}: {entry.rate:+.4f} ton/MW")
    print(audit.summary())
    return problems


def main() -> int:
    network = build()
    problems = verify(network)
    if problems:
        for problem in problems:
            print(f"PROBLEM: {problem}", file=sys.stderr)
        return 1
    dump_network(network, OUT)
    print(f"wrote {OUT}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
