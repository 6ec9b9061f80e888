"""Cost-minimizing DC optimal power flow as a linear program.

The LP lives in injection space: per-bus balance collapses to one system
balance row per period (flows are linear in injections through the PTDF), and
line limits become two one-sided PTDF inequalities per line per period.  For
multi-period networks each storage unit adds charge, discharge, and
state-of-charge variables tied together by a recursion row per period.

Locational prices are recovered from the duals: the balance dual is the price
at the slack bus, and congestion duals propagate to the other buses through
the PTDF columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import network as net
from .errors import InvalidNetworkError, OPFInfeasibleError, OPFUnboundedError
from .lp import Basis, LinearProgram, LPSolution, SolveStatus, solve_lp

# Nudge against zero-cost charge/discharge churn; far below every tolerance.
_CHARGE_NUDGE = 1e-9


@dataclass(frozen=True)
class Adjustments:
    """Additive parameter perturbations keyed by (element id, period).

    These perturb only bounds and right-hand sides, never the structure, so a
    previous basis remains a valid warm start.
    """

    load: Mapping[tuple[str, int], float] = field(default_factory=dict)
    line_capacity: Mapping[tuple[str, int], float] = field(default_factory=dict)
    gen_capacity: Mapping[tuple[str, int], float] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not (self.load or self.line_capacity or self.gen_capacity)


@dataclass(frozen=True)
class DispatchSolution:
    """One solved snapshot (or horizon) of the grid."""

    network: net.Network
    generation: np.ndarray        # (n_gen, periods) MW, network order
    flows: np.ndarray             # (n_line, periods) MW, from->to positive
    lmp: np.ndarray               # (n_bus, periods) $/MWh
    storage_charge: np.ndarray    # (n_storage, periods) MW drawn from the bus
    storage_discharge: np.ndarray  # (n_storage, periods) MW injected
    state_of_charge: np.ndarray   # (n_storage, periods) MWh at period end
    total_cost: float             # $
    scope1_by_period: np.ndarray  # ton/h
    basis: Basis | None = None

    @property
    def periods(self) -> int:
        return self.generation.shape[1] if self.generation.ndim == 2 else self.network.periods

    @property
    def scope1_total(self) -> float:
        return float(self.scope1_by_period.sum())

    @property
    def storage_dispatch(self) -> np.ndarray:
        """Signed storage power, positive when discharging."""

        return self.storage_discharge - self.storage_charge

    def generation_of(self, gen_id: str, period: int = 0) -> float:
        for i, gen in enumerate(self.network.generators):
            if gen.id == gen_id:
                return float(self.generation[i, period])
        raise KeyError(f"unknown generator {gen_id!r}")

    def flow_of(self, line_id: str, period: int = 0) -> float:
        for i, line in enumerate(self.network.lines):
            if line.id == line_id:
                return float(self.flows[i, period])
        raise KeyError(f"unknown line {line_id!r}")

    def lmp_of(self, bus_id: str, period: int = 0) -> float:
        return float(self.lmp[self.network.bus_index()[bus_id], period])

    def total_generation(self, period: int | None = None) -> float:
        if period is None:
            return float(self.generation.sum())
        return float(self.generation[:, period].sum())

    def injections(self, period: int = 0) -> np.ndarray:
        """Net MW injected at each bus: generation + storage - load."""

        index = self.network.bus_index()
        inj = -self.network.demand_by_bus(period)
        for i, gen in enumerate(self.network.generators):
            inj[index[gen.bus]] += self.generation[i, period]
        for s, unit in enumerate(self.network.storage_units):
            inj[index[unit.bus]] += (
                self.storage_discharge[s, period] - self.storage_charge[s, period]
            )
        return inj


class _Layout:
    """Variable and row indexing shared by the builder and the decoder."""

    def __init__(self, network: net.Network):
        self.network = network
        self.periods = network.periods
        self.n_bus = len(network.buses)
        self.n_line = len(network.lines)
        self.n_gen = len(network.generators)
        # Storage participates only on a multi-period horizon.
        self.storage_active = network.periods > 1
        self.n_storage = len(network.storage_units) if self.storage_active else 0
        # Generator id ordering decides ties deterministically: the simplex
        # prefers lower column indices, so equal-cost generators dispatch in
        # sorted-id order.
        self.gen_order = sorted(range(self.n_gen), key=lambda i: network.generators[i].id)
        self.block = self.n_gen + 3 * self.n_storage
        self.n_vars = self.periods * self.block
        self.n_eq = self.periods * (1 + self.n_storage)
        self.n_ub = self.periods * 2 * self.n_line
        self.slack = network.buses[0].id if network.buses else ""
        self.ptdf = net.ptdf(network, self.slack) if self.n_bus else np.zeros((0, 0))
        self.bus_index = network.bus_index()

    def gen_var(self, order_pos: int, t: int) -> int:
        return t * self.block + order_pos

    def chg_var(self, s: int, t: int) -> int:
        return t * self.block + self.n_gen + s

    def dis_var(self, s: int, t: int) -> int:
        return t * self.block + self.n_gen + self.n_storage + s

    def soc_var(self, s: int, t: int) -> int:
        return t * self.block + self.n_gen + 2 * self.n_storage + s

    def balance_row(self, t: int) -> int:
        return t * (1 + self.n_storage)

    def soc_row(self, s: int, t: int) -> int:
        return t * (1 + self.n_storage) + 1 + s

    def flow_rows(self, line_pos: int, t: int) -> tuple[int, int]:
        base = t * 2 * self.n_line + 2 * line_pos
        return base, base + 1

    def load_vector(self, t: int, adjustments: Adjustments) -> np.ndarray:
        loads = self.network.demand_by_bus(t)
        for (bus_id, period), extra in adjustments.load.items():
            if period == t:
                loads[self.bus_index[bus_id]] += extra
        return loads


def _build(network: net.Network, adjustments: Adjustments | None = None):
    adj = adjustments or Adjustments()
    lay = _Layout(network)
    T, ng, ns, nl = lay.periods, lay.n_gen, lay.n_storage, lay.n_line

    objective = np.zeros(lay.n_vars)
    lower = np.zeros(lay.n_vars)
    upper = np.zeros(lay.n_vars)
    names = [""] * lay.n_vars
    a_eq = np.zeros((lay.n_eq, lay.n_vars))
    b_eq = np.zeros(lay.n_eq)
    eq_names = [""] * lay.n_eq
    a_ub = np.zeros((lay.n_ub, lay.n_vars))
    b_ub = np.zeros(lay.n_ub)
    ub_names = [""] * lay.n_ub

    gen_cap_extra: dict[tuple[int, int], float] = {}
    for (gen_id, period), extra in adj.gen_capacity.items():
        pos = next(
            p for p, i in enumerate(lay.gen_order) if network.generators[i].id == gen_id
        )
        gen_cap_extra[(pos, period)] = gen_cap_extra.get((pos, period), 0.0) + extra

    for t in range(T):
        balance = lay.balance_row(t)
        eq_names[balance] = f"balance:t{t}"
        b_eq[balance] = float(lay.load_vector(t, adj).sum())

        for pos, gen_idx in enumerate(lay.gen_order):
            gen = network.generators[gen_idx]
            var = lay.gen_var(pos, t)
            names[var] = f"gen:{gen.id}:t{t}"
            objective[var] = gen.marginal_cost
            upper[var] = gen.capacity + gen_cap_extra.get((pos, t), 0.0)
            a_eq[balance, var] = 1.0

        for s in range(ns):
            unit = network.storage_units[s]
            chg, dis, soc = lay.chg_var(s, t), lay.dis_var(s, t), lay.soc_var(s, t)
            names[chg] = f"charge:{unit.id}:t{t}"
            names[dis] = f"discharge:{unit.id}:t{t}"
            names[soc] = f"soc:{unit.id}:t{t}"
            objective[chg] = _CHARGE_NUDGE
            upper[chg] = unit.power_capacity
            upper[dis] = unit.power_capacity
            upper[soc] = unit.energy_capacity
            a_eq[balance, dis] = 1.0
            a_eq[balance, chg] = -1.0
            row = lay.soc_row(s, t)
            eq_names[row] = f"soc:{unit.id}:t{t}"
            a_eq[row, soc] = 1.0
            a_eq[row, chg] = -unit.efficiency
            a_eq[row, dis] = 1.0
            if t == 0:
                b_eq[row] = unit.initial_charge
            else:
                a_eq[row, lay.soc_var(s, t - 1)] = -1.0

        if nl:
            loads = lay.load_vector(t, adj)
            ptdf_load = lay.ptdf @ loads
            for line_pos, line in enumerate(network.lines):
                pos_row, neg_row = lay.flow_rows(line_pos, t)
                ub_names[pos_row] = f"flow+:{line.id}:t{t}"
                ub_names[neg_row] = f"flow-:{line.id}:t{t}"
                cap = line.capacity
                cap += adj.line_capacity.get((line.id, t), 0.0)
                row = np.zeros(lay.n_vars)
                for pos, gen_idx in enumerate(lay.gen_order):
                    gen = network.generators[gen_idx]
                    row[lay.gen_var(pos, t)] = lay.ptdf[line_pos, lay.bus_index[gen.bus]]
                for s in range(ns):
                    unit = network.storage_units[s]
                    coeff = lay.ptdf[line_pos, lay.bus_index[unit.bus]]
                    row[lay.dis_var(s, t)] = coeff
                    row[lay.chg_var(s, t)] = -coeff
                a_ub[pos_row, :] = row
                b_ub[pos_row] = cap + ptdf_load[line_pos]
                a_ub[neg_row, :] = -row
                b_ub[neg_row] = cap - ptdf_load[line_pos]

    lp = LinearProgram(
        objective=objective,
        lower=lower,
        upper=upper,
        a_eq=a_eq,
        b_eq=b_eq,
        a_ub=a_ub,
        b_ub=b_ub,
        column_names=names,
        eq_names=eq_names,
        ub_names=ub_names,
    )
    return lp, lay


def build_lp(network: net.Network, adjustments: Adjustments | None = None) -> LinearProgram:
    """Assemble the dispatch LP: one balance row per period, PTDF line limits."""

    lp, _ = _build(network, adjustments)
    return lp


def solve_dcopf(
    network: net.Network,
    *,
    adjustments: Adjustments | None = None,
    warm_start: Basis | None = None,
    check: bool = True,
) -> DispatchSolution:
    """Validate, build, solve, and decode the cost-minimizing dispatch."""

    if check:
        report = net.validate(network)
        if not report.ok:
            raise InvalidNetworkError(report)
    lp, lay = _build(network, adjustments)
    solution = solve_lp(lp, warm_start=warm_start)
    if solution.status is SolveStatus.INFEASIBLE:
        raise OPFInfeasibleError(solution.certificate or "")
    if solution.status is SolveStatus.UNBOUNDED:
        raise OPFUnboundedError(solution.certificate or "")
    return _decode(network, lay, solution, adjustments or Adjustments())


def _decode(
    network: net.Network,
    lay: _Layout,
    lp_solution: LPSolution,
    adj: Adjustments,
) -> DispatchSolution:
    T, ng, ns, nl = lay.periods, lay.n_gen, lay.n_storage, lay.n_line
    x = lp_solution.x

    generation = np.zeros((ng, T))
    for pos, gen_idx in enumerate(lay.gen_order):
        for t in range(T):
            generation[gen_idx, t] = x[lay.gen_var(pos, t)]

    charge = np.zeros((len(network.storage_units), T))
    discharge = np.zeros_like(charge)
    soc = np.zeros_like(charge)
    for s in range(ns):
        for t in range(T):
            charge[s, t] = x[lay.chg_var(s, t)]
            discharge[s, t] = x[lay.dis_var(s, t)]
            soc[s, t] = x[lay.soc_var(s, t)]

    flows = np.zeros((nl, T))
    lmp = np.zeros((lay.n_bus, T))
    for t in range(T):
        inj = -lay.load_vector(t, adj)
        for i, gen in enumerate(network.generators):
            inj[lay.bus_index[gen.bus]] += generation[i, t]
        for s, unit in enumerate(network.storage_units):
            inj[lay.bus_index[unit.bus]] += discharge[s, t] - charge[s, t]
        if nl:
            flows[:, t] = lay.ptdf @ inj
        # Price at the slack plus congestion rents spread through the PTDF.
        system_price = lp_solution.y_eq[lay.balance_row(t)]
        lmp[:, t] = system_price
        if nl:
            congestion = np.zeros(nl)
            for line_pos in range(nl):
                pos_row, neg_row = lay.flow_rows(line_pos, t)
                congestion[line_pos] = (
                    lp_solution.y_ub[pos_row] - lp_solution.y_ub[neg_row]
                )
            lmp[:, t] += lay.ptdf.T @ congestion

    costs = np.array([g.marginal_cost for g in network.generators])
    rates = np.array([g.emission_rate for g in network.generators])
    total_cost = float((costs[:, None] * generation).sum())
    scope1_by_period = (rates[:, None] * generation).sum(axis=0)

    return DispatchSolution(
        network=network,
        generation=generation,
        flows=flows,
        lmp=lmp,
        storage_charge=charge,
        storage_discharge=discharge,
        state_of_charge=soc,
        total_cost=total_cost,
        scope1_by_period=scope1_by_period,
        basis=lp_solution.basis,
    )


def scope1(network: net.Network, solution: DispatchSolution) -> float:
    """Total direct emissions of the dispatch, ton/h summed over periods."""

    rates = np.array([g.emission_rate for g in network.generators])
    return float((rates[:, None] * solution.generation).sum())


def scope1_by_period(network: net.Network, solution: DispatchSolution) -> np.ndarray:
    rates = np.array([g.emission_rate for g in network.generators])
    return (rates[:, None] * solution.generation).sum(axis=0)
