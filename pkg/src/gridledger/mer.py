"""Marginal emissions rates by finite-difference re-solves of the OPF.

A rate is the change in total system emissions per MW of perturbation at one
element: bus load, line capacity, or generator capacity.  Because the LP value
function is piecewise linear, any epsilon inside a linearity region gives the
exact one-sided derivative; the default 0.01 MW keeps region crossings rare.

Forward differences are the headline direction (the marginal *additional* MW).
When the two one-sided rates disagree the perturbation sits on a kink and both
are reported.  Re-solves reuse the base simplex basis as a warm start; results
are identical with or without it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import network as net
from .accounting import aer as _aer
from .accounting import residual_mix as _residual_mix
from .errors import OPFInfeasibleError, RateUnavailableError, UndefinedRateError
from .opf import Adjustments, DispatchSolution, solve_dcopf

DEFAULT_EPSILON = 0.01  # MW
KINK_TOLERANCE = 1e-6   # ton/MWh
DIRECTIONS = ("forward", "backward", "central")


@dataclass(frozen=True)
class Perturbation:
    """How to probe the system: step size and difference direction."""

    epsilon: float = DEFAULT_EPSILON
    direction: str = "forward"
    target_kind: str | None = None  # bus-load | line-capacity | generator-capacity
    target: str | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")


@dataclass(frozen=True)
class RateValue:
    """One marginal rate with its one-sided components."""

    rate: float
    forward: float | None
    backward: float | None
    capacity_limited: bool = False

    @property
    def kinked(self) -> bool:
        if self.forward is None or self.backward is None:
            return False
        return abs(self.forward - self.backward) > KINK_TOLERANCE

    def __float__(self) -> float:
        return self.rate


@dataclass
class RateSet:
    """All rates for one solved period, plus the grid-wide averages."""

    period: int
    bus_mer: dict[str, RateValue] = field(default_factory=dict)
    line_mer: dict[str, RateValue] = field(default_factory=dict)
    gen_capacity_mer: dict[str, RateValue] = field(default_factory=dict)
    aer: float | None = None
    rer: float | None = None
    errors: dict[str, str] = field(default_factory=dict)

    def bus_rate(self, bus_id: str) -> float:
        return self.bus_mer[bus_id].rate

    def line_rate(self, line_id: str) -> float:
        return self.line_mer[line_id].rate

    def gen_rate(self, gen_id: str) -> float:
        return self.gen_capacity_mer[gen_id].rate


def _ensure_base(network: net.Network, base: DispatchSolution | None) -> DispatchSolution:
    return base if base is not None else solve_dcopf(network)


def _scope1_delta(
    network: net.Network,
    base: DispatchSolution,
    adjustments: Adjustments,
) -> float | None:
    """Total-emissions change of a reparameterized solve, None if infeasible."""

    try:
        solution = solve_dcopf(
            network, adjustments=adjustments, warm_start=base.basis, check=False
        )
    except OPFInfeasibleError:
        return None
    return solution.scope1_total - base.scope1_total


def _differentiate(
    network: net.Network,
    base: DispatchSolution,
    perturbation: Perturbation,
    make_adjustments,
) -> RateValue:
    eps = perturbation.epsilon
    fwd_delta = _scope1_delta(network, base, make_adjustments(+eps))
    bwd_delta = _scope1_delta(network, base, make_adjustments(-eps))
    forward = fwd_delta / eps if fwd_delta is not None else None
    backward = -bwd_delta / eps if bwd_delta is not None else None

    if forward is None and backward is None:
        raise RateUnavailableError(
            "perturbation infeasible in both directions"
        )
    direction = perturbation.direction
    limited = False
    if direction == "central" and forward is not None and backward is not None:
        rate = 0.5 * (forward + backward)
    elif direction == "backward":
        if backward is None:
            rate, limited = forward, True
        else:
            rate = backward
    else:  # forward headline
        if forward is None:
            rate, limited = backward, True
        else:
            rate = forward
    return RateValue(rate=rate, forward=forward, backward=backward, capacity_limited=limited)


def bus_mer(
    network: net.Network,
    bus: str,
    perturbation: Perturbation | None = None,
    *,
    period: int = 0,
    base: DispatchSolution | None = None,
) -> RateValue:
    """Rate of system-emissions change per MW of extra load at the bus."""

    if bus not in network.bus_index():
        raise KeyError(f"unknown bus {bus!r}")
    pert = perturbation or Perturbation()
    base = _ensure_base(network, base)
    return _differentiate(
        network, base, pert, lambda eps: Adjustments(load={(bus, period): eps})
    )


def line_mer(
    network: net.Network,
    line: str,
    perturbation: Perturbation | None = None,
    *,
    period: int = 0,
    base: DispatchSolution | None = None,
) -> RateValue:
    """Rate of system-emissions change per MW of added line capacity."""

    network.line(line)
    pert = perturbation or Perturbation()
    base = _ensure_base(network, base)
    return _differentiate(
        network, base, pert, lambda eps: Adjustments(line_capacity={(line, period): eps})
    )


def gen_capacity_mer(
    network: net.Network,
    generator: str,
    perturbation: Perturbation | None = None,
    *,
    period: int = 0,
    base: DispatchSolution | None = None,
) -> RateValue:
    """Rate of system-emissions change per MW of added generator capacity."""

    network.generator(generator)
    pert = perturbation or Perturbation()
    base = _ensure_base(network, base)
    return _differentiate(
        network, base, pert, lambda eps: Adjustments(gen_capacity={(generator, period): eps})
    )


def rate_profile(
    network: net.Network,
    *,
    epsilon: float = DEFAULT_EPSILON,
    direction: str = "forward",
    include_lines: bool = True,
    include_generators: bool = True,
    base: DispatchSolution | None = None,
) -> list[RateSet]:
    """One RateSet per period, sweeping every bus (and line and generator).

    Per-element failures are collected in ``RateSet.errors`` instead of
    aborting the sweep.  The base solve is shared by every perturbation.
    """

    base = _ensure_base(network, base)
    pert = Perturbation(epsilon=epsilon, direction=direction)
    profile: list[RateSet] = []
    for t in range(network.periods):
        rates = RateSet(period=t)
        try:
            rates.aer = _aer(network, base, period=t)
        except UndefinedRateError:
            rates.aer = None
        if network.contracts:
            try:
                rates.rer = _residual_mix(network, base, period=t)
            except UndefinedRateError:
                rates.rer = None
        for bus in network.buses:
            try:
                rates.bus_mer[bus.id] = bus_mer(
                    network, bus.id, pert, period=t, base=base
                )
            except RateUnavailableError as exc:
                rates.errors[bus.id] = str(exc)
        if include_lines:
            for line in network.lines:
                try:
                    rates.line_mer[line.id] = line_mer(
                        network, line.id, pert, period=t, base=base
                    )
                except RateUnavailableError as exc:
                    rates.errors[line.id] = str(exc)
        if include_generators:
            for gen in network.generators:
                try:
                    rates.gen_capacity_mer[gen.id] = gen_capacity_mer(
                        network, gen.id, pert, period=t, base=base
                    )
                except RateUnavailableError as exc:
                    rates.errors[gen.id] = str(exc)
        profile.append(rates)
    return profile


def average_bus_rates(profile: list[RateSet]) -> dict[str, float]:
    """Plain (uniform) mean of each bus rate across periods."""

    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for rates in profile:
        for bus_id, value in rates.bus_mer.items():
            sums[bus_id] = sums.get(bus_id, 0.0) + value.rate
            counts[bus_id] = counts.get(bus_id, 0) + 1
    return {bus_id: sums[bus_id] / counts[bus_id] for bus_id in sums}
