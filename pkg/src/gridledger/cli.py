"""Command-line front end.

Subcommands: validate, solve, rates, footprint, scenario, compare.  Network
arguments accept a file path or the name of a bundled fixture.  Output is a
human-readable table by default, or machine-readable CSV/JSON via --format.

Exit codes: 0 success, 1 input error, 2 infeasible dispatch, 3 audit failure.
The GRIDLEDGER_TOL environment variable overrides the audit tolerance.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

from . import accounting as acc
from . import mer
from . import scenario as scn
from .errors import (
    GridLedgerError,
    InvalidNetworkError,
    NetworkFormatError,
    OPFInfeasibleError,
    OPFUnboundedError,
    ScenarioInfeasibleError,
)
from .network import Network, load_contracts, load_network, validate, with_contracts
from .opf import DispatchSolution, solve_dcopf

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_AUDIT_FAILED = 3

_REGIMES = ("location", "market", "mer")
_RATE_DECIMALS = 4
_FOOTPRINT_DECIMALS = 2


def _resolve_path(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    from . import fixtures  # deferred: fixtures imports scenario

    return fixtures.fixture_path(name)


def _load_network_arg(args) -> Network:
    network = load_network(_resolve_path(args.network))
    if getattr(args, "contracts", None):
        network = with_contracts(network, load_contracts(_resolve_path(args.contracts)))
    return network


def _require_valid(network: Network) -> None:
    report = validate(network)
    if not report.ok:
        raise InvalidNetworkError(report)


def _audit_tolerance() -> float:
    raw = os.environ.get("GRIDLEDGER_TOL")
    if raw is None:
        return acc.AUDIT_TOLERANCE
    try:
        return float(raw)
    except ValueError as exc:
        raise NetworkFormatError(f"GRIDLEDGER_TOL is not a number: {raw!r}") from exc


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _fmt(value, decimals: int) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        if math.isinf(value):
            return "unlimited"
        return f"{round(value, decimals) + 0.0:.{decimals}f}"  # kills -0.00
    return str(value)


def _render_table(title: str, headers: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [title] if title else []
    lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(h for h in headers)))
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)


def _render_csv(headers: list[str], rows: list[list]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(headers)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


def _emit(args, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    network = _load_network_arg(args)
    report = validate(network)
    if report.ok:
        _emit(args, "network is well-formed")
        return EXIT_OK
    _emit(args, report.summary())
    return EXIT_INPUT_ERROR


def _solve_payload(network: Network, solution: DispatchSolution) -> dict:
    return {
        "generation": {
            g.id: [float(x) for x in solution.generation[i]]
            for i, g in enumerate(network.generators)
        },
        "flows": {
            l.id: [float(x) for x in solution.flows[i]]
            for i, l in enumerate(network.lines)
        },
        "lmp": {
            b.id: [float(x) for x in solution.lmp[i]]
            for i, b in enumerate(network.buses)
        },
        "storage_dispatch": {
            s.id: [float(x) for x in solution.storage_dispatch[i]]
            for i, s in enumerate(network.storage_units)
        },
        "total_cost": solution.total_cost,
        "scope1_by_period": [float(x) for x in solution.scope1_by_period],
        "scope1_total": solution.scope1_total,
    }


def cmd_solve(args) -> int:
    network = _load_network_arg(args)
    _require_valid(network)
    solution = solve_dcopf(network, check=False)
    if args.format == "json":
        _emit(args, json.dumps(_solve_payload(network, solution), indent=2))
        return EXIT_OK
    if args.format == "csv":
        rows = []
        for i, g in enumerate(network.generators):
            for t in range(network.periods):
                rows.append(["generation", g.id, t, float(solution.generation[i, t])])
        for i, l in enumerate(network.lines):
            for t in range(network.periods):
                rows.append(["flow", l.id, t, float(solution.flows[i, t])])
        for i, b in enumerate(network.buses):
            for t in range(network.periods):
                rows.append(["lmp", b.id, t, float(solution.lmp[i, t])])
        for i, s in enumerate(network.storage_units):
            for t in range(network.periods):
                rows.append(["storage", s.id, t, float(solution.storage_dispatch[i, t])])
        for t in range(network.periods):
            rows.append(["scope1", "system", t, float(solution.scope1_by_period[t])])
        _emit(args, _render_csv(["kind", "id", "period", "value"], rows))
        return EXIT_OK

    blocks = []
    gen_rows = [
        [g.id, g.bus]
        + [_fmt(float(solution.generation[i, t]), _FOOTPRINT_DECIMALS) for t in range(network.periods)]
        for i, g in enumerate(network.generators)
    ]
    period_headers = [f"MW t{t}" for t in range(network.periods)]
    blocks.append(_render_table("Dispatch", ["generator", "bus"] + period_headers, gen_rows))
    if network.lines:
        line_rows = [
            [l.id, f"{l.from_bus}->{l.to_bus}", _fmt(l.capacity, _FOOTPRINT_DECIMALS)]
            + [_fmt(float(solution.flows[i, t]), _FOOTPRINT_DECIMALS) for t in range(network.periods)]
            for i, l in enumerate(network.lines)
        ]
        blocks.append(
            _render_table("Flows", ["line", "direction", "cap MW"] + period_headers, line_rows)
        )
    lmp_rows = [
        [b.id]
        + [_fmt(float(solution.lmp[i, t]), _FOOTPRINT_DECIMALS) for t in range(network.periods)]
        for i, b in enumerate(network.buses)
    ]
    blocks.append(_render_table("Locational prices ($/MWh)", ["bus"] + [f"t{t}" for t in range(network.periods)], lmp_rows))
    if network.storage_units:
        stor_rows = [
            [s.id]
            + [_fmt(float(solution.storage_dispatch[i, t]), _FOOTPRINT_DECIMALS) for t in range(network.periods)]
            for i, s in enumerate(network.storage_units)
        ]
        blocks.append(_render_table("Storage dispatch (+discharge MW)", ["unit"] + [f"t{t}" for t in range(network.periods)], stor_rows))
    blocks.append(
        f"total cost: {solution.total_cost:.2f} $/h\n"
        f"scope1: {solution.scope1_total:.{_FOOTPRINT_DECIMALS}f} ton/h"
    )
    _emit(args, "\n\n".join(blocks))
    return EXIT_OK


def _rate_rows(network: Network, profile: list[mer.RateSet]) -> list[list]:
    rows = []
    for rates in profile:
        for bus in network.buses:
            if bus.id in rates.bus_mer:
                rows.append([bus.id, "bus", rates.period, rates.bus_rate(bus.id)])
        for line in network.lines:
            if line.id in rates.line_mer:
                rows.append([line.id, "line", rates.period, rates.line_rate(line.id)])
        for gen in network.generators:
            if gen.id in rates.gen_capacity_mer:
                rows.append([gen.id, "generator", rates.period, rates.gen_rate(gen.id)])
        if rates.aer is not None:
            rows.append(["system", "aer", rates.period, rates.aer])
        if rates.rer is not None:
            rows.append(["system", "rer", rates.period, rates.rer])
    return rows


def cmd_rates(args) -> int:
    network = _load_network_arg(args)
    _require_valid(network)
    solution = solve_dcopf(network, check=False)
    profile = mer.rate_profile(network, epsilon=args.epsilon, base=solution)
    rows = _rate_rows(network, profile)
    if args.format == "json":
        payload = [
            dict(zip(("element", "kind", "period", "rate"), row)) for row in rows
        ]
        errors = {str(p.period): p.errors for p in profile if p.errors}
        _emit(args, json.dumps({"rates": payload, "errors": errors}, indent=2))
        return EXIT_OK
    if args.format == "csv":
        _emit(args, _render_csv(["element", "kind", "period", "rate"], rows))
        return EXIT_OK
    table_rows = [
        [element, kind, str(period), _fmt(rate, _RATE_DECIMALS)]
        for element, kind, period, rate in rows
    ]
    _emit(args, _render_table("Marginal and average emission rates (ton/MWh; lines ton/MW)", ["element", "kind", "period", "rate"], table_rows))
    return EXIT_OK


def _build_ledger(args, network: Network, solution: DispatchSolution):
    if args.regime == "location":
        return acc.ghgp_location_ledger(network, solution)
    if args.regime == "market":
        return acc.ghgp_market_ledger(network, solution, rate_mode=args.rate_mode)
    profile = mer.rate_profile(
        network, epsilon=args.epsilon, base=solution,
        include_lines=False, include_generators=False,
    )
    return acc.mer_ledger(network, solution, profile)


def cmd_footprint(args) -> int:
    network = _load_network_arg(args)
    _require_valid(network)
    solution = solve_dcopf(network, check=False)
    ledger = _build_ledger(args, network, solution)
    audit = acc.audit_balance(ledger, tolerance=_audit_tolerance())
    if args.format == "json":
        payload = acc.ledger_to_dict(ledger)
        payload["audit"] = {
            "passed": audit.passed,
            "residual": audit.residual,
            "tolerance": audit.tolerance,
        }
        _emit(args, json.dumps(payload, indent=2))
    elif args.format == "csv":
        _emit(args, acc.ledger_to_csv(ledger))
    else:
        rows = [
            [kind, element_id, str(period), _fmt(rate, _RATE_DECIMALS), _fmt(footprint, _FOOTPRINT_DECIMALS)]
            for kind, element_id, period, rate, footprint, _ in acc.ledger_records(ledger)
        ]
        table = _render_table(
            f"Carbon footprints, {ledger.regime} regime (ton/h)",
            ["kind", "id", "period", "rate", "footprint"],
            rows,
        )
        totals = "  ".join(
            f"{name} {total:.{_FOOTPRINT_DECIMALS}f}"
            for name, total in audit.category_totals.items()
        )
        _emit(args, f"{table}\n\ntotals: {totals}  grand {ledger.total:.{_FOOTPRINT_DECIMALS}f}\n{audit.summary()}")
    return EXIT_OK if audit.passed else EXIT_AUDIT_FAILED


def cmd_scenario(args) -> int:
    network = _load_network_arg(args)
    _require_valid(network)
    delta = scn.load_scenario(_resolve_path(args.scenario))
    report = scn.evaluate(network, delta, epsilon=args.epsilon)
    if args.format == "json":
        payload = {
            "scope1_before": report.base.scope1,
            "scope1_after": report.modified.scope1,
            "scope1_delta": report.scope1_delta,
            "predicted_delta": report.predicted_delta,
            "prediction_exact": report.prediction_exact,
            "aer_before": report.base.aer,
            "aer_after": report.modified.aer,
            "ledger_totals_before": {k: v.total for k, v in report.base.ledgers.items()},
            "ledger_totals_after": {k: v.total for k, v in report.modified.ledgers.items()},
            "generation_before": _solve_payload(network, report.base.solution)["generation"],
            "generation_after": _solve_payload(report.modified.network, report.modified.solution)["generation"],
        }
        _emit(args, json.dumps(payload, indent=2))
        return EXIT_OK
    if args.format == "csv":
        rows = [
            ["scope1", report.base.scope1, report.modified.scope1],
            ["aer", report.base.aer, report.modified.aer],
            ["predicted_delta", 0.0, report.predicted_delta],
        ]
        for i, g in enumerate(network.generators):
            rows.append([
                f"generation:{g.id}",
                float(report.base.solution.generation[i].sum()),
                float(report.modified.solution.generation_of(g.id) if any(m.id == g.id for m in report.modified.network.generators) else 0.0),
            ])
        _emit(args, _render_csv(["quantity", "before", "after"], rows))
        return EXIT_OK

    rows = [
        ["scope1 (ton/h)", _fmt(report.base.scope1, 2), _fmt(report.modified.scope1, 2)],
        ["average rate (ton/MWh)", _fmt(report.base.aer, _RATE_DECIMALS), _fmt(report.modified.aer, _RATE_DECIMALS)],
    ]
    for regime in ("location", "market", "carbon-matching"):
        before = report.base.ledgers.get(regime)
        after = report.modified.ledgers.get(regime)
        if before or after:
            rows.append([
                f"{regime} ledger total",
                _fmt(before.total if before else None, 2),
                _fmt(after.total if after else None, 2),
            ])
    for i, g in enumerate(network.generators):
        after_val = None
        for j, m in enumerate(report.modified.network.generators):
            if m.id == g.id:
                after_val = float(report.modified.solution.generation[j].sum())
        rows.append([
            f"generation {g.id} (MW)",
            _fmt(float(report.base.solution.generation[i].sum()), 2),
            _fmt(after_val, 2),
        ])
    table = _render_table("Scenario comparison", ["quantity", "before", "after"], rows)
    summary = (
        f"realized scope1 change: {report.scope1_delta:+.2f} ton/h; "
        f"predicted at decision time: {report.predicted_delta:+.2f} ton/h"
    )
    if not report.prediction_exact:
        summary += "  [prediction crossed a dispatch kink]"
    _emit(args, f"{table}\n\n{summary}")
    return EXIT_OK


def cmd_compare(args) -> int:
    network = _load_network_arg(args)
    _require_valid(network)
    solution = solve_dcopf(network, check=False)
    profile = mer.rate_profile(
        network, epsilon=args.epsilon, base=solution,
        include_lines=False, include_generators=False,
    )
    location = acc.ghgp_location_ledger(network, solution)
    matching = acc.mer_ledger(network, solution, profile)
    market = (
        acc.ghgp_market_ledger(network, solution, rate_mode=args.rate_mode)
        if network.contracts
        else None
    )
    rows = []
    for load in network.loads:
        rows.append([
            load.id,
            location.load_footprints.get(load.id, 0.0),
            market.load_footprints.get(load.id, 0.0) if market else None,
            matching.load_footprints.get(load.id, 0.0),
        ])
    budget_row = None
    if args.bus:
        budget = scn.ton_budget(network, args.bus, 1.0, base=solution, rates=profile[0])
        budget_row = budget
    if args.format == "json":
        payload = {
            "loads": [
                {
                    "id": row[0],
                    "location": row[1],
                    "market": row[2],
                    "carbon_matching": row[3],
                }
                for row in rows
            ],
        }
        if budget_row:
            payload["ton_budget"] = {
                "bus": budget_row.bus,
                "aer_rate": budget_row.aer_rate,
                "mer_rate": budget_row.mer_rate,
                "aer_mwh": None if budget_row.aer_unlimited else budget_row.aer_mwh,
                "mer_mwh": None if budget_row.mer_unlimited else budget_row.mer_mwh,
            }
        _emit(args, json.dumps(payload, indent=2))
        return EXIT_OK
    if args.format == "csv":
        csv_rows = [[r[0], r[1], "" if r[2] is None else r[2], r[3]] for r in rows]
        _emit(args, _render_csv(["load", "location", "market", "carbon_matching"], csv_rows))
        return EXIT_OK
    table_rows = [
        [
            r[0],
            _fmt(r[1], _FOOTPRINT_DECIMALS),
            _fmt(r[2], _FOOTPRINT_DECIMALS),
            _fmt(r[3], _FOOTPRINT_DECIMALS),
        ]
        for r in rows
    ]
    out = _render_table(
        "Load footprints by regime (ton/h)",
        ["load", "location", "market", "carbon-matching"],
        table_rows,
    )
    if budget_row:
        out += (
            f"\n\n1 ton of emissions at bus {budget_row.bus}: "
            f"{_fmt(budget_row.aer_mwh, _RATE_DECIMALS)} MWh at the average rate, "
            f"{_fmt(budget_row.mer_mwh, _RATE_DECIMALS)} MWh at the marginal rate"
        )
    _emit(args, out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", "-f", choices=("table", "csv", "json"), default="table")
    parser.add_argument("--out", "-o", metavar="PATH", help="write output to a file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridledger",
        description="Grid carbon accounting: dispatch, marginal rates, footprint ledgers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a network file against the format invariants")
    p.add_argument("network", help="network file or bundled fixture name")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="cost-minimizing dispatch with flows and prices")
    p.add_argument("network")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("rates", help="marginal emission rates for buses, lines, generators")
    p.add_argument("network")
    p.add_argument("--epsilon", type=float, default=mer.DEFAULT_EPSILON, metavar="MW")
    _add_common(p)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("footprint", help="carbon footprint ledger under one regime")
    p.add_argument("network")
    p.add_argument("--regime", choices=_REGIMES, default="mer")
    p.add_argument("--rate-mode", choices=("residual", "average"), default="residual")
    p.add_argument("--contracts", metavar="PATH", help="contracts file replacing the network's")
    p.add_argument("--epsilon", type=float, default=mer.DEFAULT_EPSILON, metavar="MW")
    _add_common(p)
    p.set_defaults(func=cmd_footprint)

    p = sub.add_parser("scenario", help="before/after comparison for a structural change")
    p.add_argument("network")
    p.add_argument("scenario")
    p.add_argument("--epsilon", type=float, default=mer.DEFAULT_EPSILON, metavar="MW")
    _add_common(p)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("compare", help="side-by-side load footprints under all regimes")
    p.add_argument("network")
    p.add_argument("--contracts", metavar="PATH")
    p.add_argument("--rate-mode", choices=("residual", "average"), default="residual")
    p.add_argument("--bus", metavar="ID", help="bus for the energy-per-ton row")
    p.add_argument("--epsilon", type=float, default=mer.DEFAULT_EPSILON, metavar="MW")
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OPFInfeasibleError, OPFUnboundedError, ScenarioInfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (GridLedgerError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
