"""Physical layer of the simulated network.

Generates per-slot channel realisations and URLLC packet arrivals, and
realises data rates for a chosen allocation. Everything is driven by a
single seedable numpy Generator per run, so (seed, scenario) fully
determines the trajectory.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

import numpy as np

from .domain import (
    AllocationMatrix,
    ChannelState,
    QoSRequirement,
    ResourceGrid,
    ServiceClass,
    SlotClock,
    TrafficState,
    UserTerminal,
    canonical_users,
    validate_allocation,
)


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


class FadingModel(enum.Enum):
    RAYLEIGH = "rayleigh"
    RICIAN = "rician"


@dataclass(frozen=True)
class FadingParams:
    """Small-scale fading drawn i.i.d. per slot per resource block.

    Power gains have unit mean, so the configured mean SNR is preserved in
    expectation. ``k_factor`` of ``math.inf`` degenerates to no fading.
    """

    model: FadingModel = FadingModel.RAYLEIGH
    k_factor: float = 0.0

    def __post_init__(self):
        if self.model is FadingModel.RICIAN and self.k_factor < 0:
            raise ValueError("Rician k_factor must be >= 0")


@dataclass(frozen=True)
class LinkBudget:
    mean_snr_db: float
    fading: FadingParams = field(default_factory=FadingParams)

    def __post_init__(self):
        if not math.isfinite(self.mean_snr_db):
            raise ValueError("mean_snr_db must be finite")


@dataclass(frozen=True)
class PhysicalState:
    """Everything the physical network knows at the start of one slot."""

    clock: SlotClock
    channel: ChannelState
    traffic: TrafficState
    qos: QoSRequirement
    users: tuple[UserTerminal, ...]
    grid: ResourceGrid

    def __post_init__(self):
        if self.channel.snr.shape != (len(self.users), self.grid.num_rbs):
            raise ValueError(
                f"channel shape {self.channel.snr.shape} does not match "
                f"{len(self.users)} users x {self.grid.num_rbs} RBs"
            )


def fading_gains(
    rng: np.random.Generator, params: FadingParams, shape: tuple[int, ...]
) -> np.ndarray:
    """Draw unit-mean power gains for the given fading model."""
    if params.model is FadingModel.RAYLEIGH:
        return rng.exponential(1.0, size=shape)
    # Rician: |sqrt(K/(K+1)) + sqrt(1/(K+1)) w|^2 with w ~ CN(0,1); unit mean.
    k = params.k_factor
    if math.isinf(k):
        return np.ones(shape)
    los = math.sqrt(k / (k + 1.0))
    scale = math.sqrt(1.0 / (2.0 * (k + 1.0)))
    re = los + scale * rng.standard_normal(shape)
    im = scale * rng.standard_normal(shape)
    return re * re + im * im


def step_channel(
    rng: np.random.Generator,
    users: Iterable[UserTerminal],
    grid: ResourceGrid,
) -> ChannelState:
    """Draw one slot's SNR matrix: per-user mean times an i.i.d. fading gain."""
    ordered = canonical_users(users)
    snr = np.empty((len(ordered), grid.num_rbs))
    for row, user in enumerate(ordered):
        mean = db_to_linear(user.link.mean_snr_db)
        snr[row] = mean * fading_gains(rng, user.link.fading, (grid.num_rbs,))
    return ChannelState(snr=snr, user_ids=tuple(u.id for u in ordered))


def urllc_arrivals(rng: np.random.Generator, lam: float) -> int:
    """Packet count for one slot, Poisson with mean ``lam``."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0:
        return 0
    return int(rng.poisson(lam))


def rate_matrix(
    ch: ChannelState, grid: ResourceGrid, slot_duration: float
) -> np.ndarray:
    """Shannon bits/slot each user would get from each block alone."""
    return grid.rb_bandwidth * slot_duration * np.log2(1.0 + ch.snr)


def user_rate(
    m: AllocationMatrix,
    ch: ChannelState,
    user_id: int,
    grid: ResourceGrid,
    slot_duration: float,
) -> float:
    """Bits/slot delivered capacity of one user under an allocation.

    Sequential accumulation in block-index order; independent re-derivations
    that follow the same order reproduce the float exactly.
    """
    row = ch.row(user_id)
    rate = 0.0
    for b, uid in enumerate(m.assignment):
        if uid == user_id:
            rate += grid.rb_bandwidth * math.log2(1.0 + row[b]) * slot_duration
    return rate


@dataclass(frozen=True)
class SlotOutcome:
    """Realised rates and queue movements for one simulated slot.

    ``rates`` are Shannon capacities of the allocation (bits/slot);
    ``urllc_sum_rate`` is their sum over URLLC users, the quantity the
    outage contract is written against. ``urllc_served_bits`` is what the
    backlog actually allowed to be drained, so it never exceeds the rate.
    """

    t: int
    rates: Mapping[int, float]
    embb_sum_rate: float
    urllc_sum_rate: float
    urllc_served_bits: Mapping[int, float]
    urllc_arrival_packets: int
    lambda_t: float

    @property
    def urllc_served_total(self) -> float:
        return float(sum(self.urllc_served_bits.values()))


def advance(
    state: PhysicalState,
    decision: AllocationMatrix,
    rng: np.random.Generator,
    next_lambda: Optional[float] = None,
) -> tuple[PhysicalState, SlotOutcome]:
    """Apply an allocation for the current slot and move to the next one.

    Order of events within the slot: realise rates against the current
    channel, drain URLLC queues by served bits, add the slot's new arrivals
    (packet count times packet size), then tick the clock and draw a fresh
    channel. ``next_lambda`` sets the following slot's arrival rate; omitted
    means unchanged.
    """
    check = validate_allocation(decision, state.grid, state.users)
    if not check:
        raise ValueError(f"invalid allocation: {check.reason}")

    tau = state.clock.slot_duration
    rates = {
        u.id: user_rate(decision, state.channel, u.id, state.grid, tau)
        for u in state.users
    }
    embb_sum = 0.0
    urllc_sum = 0.0
    for u in state.users:
        if u.service is ServiceClass.EMBB:
            embb_sum += rates[u.id]
        else:
            urllc_sum += rates[u.id]

    traffic = state.traffic
    urllc_ids = traffic.urllc_user_ids
    n_urllc = len(urllc_ids)
    queue = np.array(traffic.urllc_queue, copy=True)

    served: dict[int, float] = {}
    for i, uid in enumerate(urllc_ids):
        drained = min(queue[i], rates[uid])
        queue[i] -= drained
        served[uid] = float(drained)

    lam_t = traffic.urllc_rate
    arrivals_total = 0
    if n_urllc > 0:
        # Independent per-user Poisson(lam/n) streams; the aggregate stays
        # Poisson(lam).
        for i in range(n_urllc):
            k = urllc_arrivals(rng, lam_t / n_urllc)
            arrivals_total += k
            queue[i] += k * state.qos.urllc_packet_bits

    outcome = SlotOutcome(
        t=state.clock.t,
        rates=rates,
        embb_sum_rate=embb_sum,
        urllc_sum_rate=urllc_sum,
        urllc_served_bits=served,
        urllc_arrival_packets=arrivals_total,
        lambda_t=lam_t,
    )

    next_state = PhysicalState(
        clock=state.clock.tick(),
        channel=step_channel(rng, state.users, state.grid),
        traffic=TrafficState(
            urllc_rate=lam_t if next_lambda is None else float(next_lambda),
            urllc_queue=queue,
            urllc_user_ids=urllc_ids,
            embb_fully_buffered=traffic.embb_fully_buffered,
        ),
        qos=state.qos,
        users=state.users,
        grid=state.grid,
    )
    return next_state, outcome


class Environment:
    """Owns one run's physical trajectory: state, rng stream and lambda plan."""

    def __init__(
        self,
        users: Iterable[UserTerminal],
        grid: ResourceGrid,
        qos: QoSRequirement,
        slot_duration: float,
        lambda_schedule: Callable[[int], float],
        seed: int,
    ):
        self.users = canonical_users(users)
        self.grid = grid
        self.qos = qos
        self.lambda_schedule = lambda_schedule
        self.rng = np.random.default_rng(seed)
        urllc_ids = tuple(
            u.id for u in self.users if u.service is ServiceClass.URLLC
        )
        self.state = PhysicalState(
            clock=SlotClock(0, slot_duration),
            channel=step_channel(self.rng, self.users, grid),
            traffic=TrafficState(
                urllc_rate=float(lambda_schedule(0)),
                urllc_queue=np.zeros(len(urllc_ids)),
                urllc_user_ids=urllc_ids,
            ),
            qos=qos,
            users=self.users,
            grid=grid,
        )

    @property
    def now(self) -> int:
        return self.state.clock.t

    def step(self, decision: AllocationMatrix) -> SlotOutcome:
        self.state, outcome = advance(
            self.state,
            decision,
            self.rng,
            next_lambda=self.lambda_schedule(self.now + 1),
        )
        return outcome
