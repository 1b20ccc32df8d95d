"""Core vocabulary types shared by the environment, twin, policies and metrics.

Everything here is an immutable value object: instances can be shared freely
across threads and across simulation runs. Numpy arrays held by these types
are copied on construction and marked read-only.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, NamedTuple, Optional

import numpy as np

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .envsim import LinkBudget

#: Sentinel user id for an idle resource block.
UNASSIGNED = -1


class ServiceClass(enum.Enum):
    EMBB = "embb"
    URLLC = "urllc"


@dataclass(frozen=True)
class SlotClock:
    """Discrete simulation time: slot index plus the physical slot length."""

    t: int
    slot_duration: float  # seconds per slot

    def __post_init__(self):
        if self.t < 0 or int(self.t) != self.t:
            raise ValueError(f"slot index must be a nonnegative integer, got {self.t}")
        if not self.slot_duration > 0:
            raise ValueError(f"slot_duration must be > 0, got {self.slot_duration}")

    def tick(self) -> "SlotClock":
        return SlotClock(self.t + 1, self.slot_duration)


@dataclass(frozen=True)
class UserTerminal:
    id: int
    service: ServiceClass
    link: "LinkBudget"

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"user id must be nonnegative, got {self.id}")


def canonical_users(users: Iterable[UserTerminal]) -> tuple[UserTerminal, ...]:
    """Sort users by ascending id and reject duplicate ids.

    This ordering is the contract for every user-indexed array in the
    package: channel rows, feature slices and softmax columns all follow it.
    """
    ordered = tuple(sorted(users, key=lambda u: u.id))
    ids = [u.id for u in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate user ids in {ids}")
    return ordered


@dataclass(frozen=True)
class QoSRequirement:
    """Per-run service contracts.

    eMBB demands a minimum sustained rate (bits/second). URLLC carries
    fixed-size packets of ``urllc_packet_bits`` bits and tolerates an outage
    probability of at most ``urllc_outage_threshold``.
    """

    embb_min_rate: float = 0.0
    urllc_packet_bits: int = 256  # 32-byte packets
    urllc_outage_threshold: float = 0.07

    def __post_init__(self):
        if not self.urllc_packet_bits > 0:
            raise ValueError("urllc_packet_bits must be > 0")
        if not 0.0 < self.urllc_outage_threshold < 1.0:
            raise ValueError("urllc_outage_threshold out of range (0, 1)")
        if self.embb_min_rate < 0:
            raise ValueError("embb_min_rate must be >= 0")


@dataclass(frozen=True)
class ResourceGrid:
    """One slot's worth of assignable spectrum, split into resource blocks."""

    num_rbs: int
    rb_bandwidth: float  # Hz per block

    def __post_init__(self):
        if self.num_rbs < 1:
            raise ValueError(f"num_rbs must be >= 1, got {self.num_rbs}")
        if not self.rb_bandwidth > 0:
            raise ValueError(f"rb_bandwidth must be > 0, got {self.rb_bandwidth}")

    @property
    def system_bandwidth(self) -> float:
        return self.num_rbs * self.rb_bandwidth


@dataclass(frozen=True)
class AllocationMatrix:
    """Per-slot map of each resource block to one user id or UNASSIGNED."""

    assignment: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(a) for a in self.assignment))

    def __len__(self) -> int:
        return len(self.assignment)

    def blocks_of(self, user_id: int) -> tuple[int, ...]:
        return tuple(b for b, uid in enumerate(self.assignment) if uid == user_id)

    def assigned_ids(self) -> set[int]:
        return {uid for uid in self.assignment if uid != UNASSIGNED}


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ChannelState:
    """Linear-scale SNR per user per resource block for one slot.

    Rows follow ascending user id order; ``user_ids`` records that order
    explicitly so callers never guess the mapping.
    """

    snr: np.ndarray  # [num_users, num_rbs]
    user_ids: tuple[int, ...]

    def __post_init__(self):
        snr = _readonly(np.atleast_2d(self.snr))
        object.__setattr__(self, "snr", snr)
        object.__setattr__(self, "user_ids", tuple(int(i) for i in self.user_ids))
        if snr.shape[0] != len(self.user_ids):
            raise ValueError(
                f"snr has {snr.shape[0]} rows for {len(self.user_ids)} user ids"
            )
        if any(b >= a for a, b in zip(self.user_ids[1:], self.user_ids)):
            raise ValueError("user_ids must be strictly increasing")
        if not np.all(np.isfinite(snr)) or np.any(snr < 0):
            raise ValueError("snr entries must be finite and >= 0")

    @property
    def num_rbs(self) -> int:
        return self.snr.shape[1]

    def row(self, user_id: int) -> np.ndarray:
        return self.snr[self.user_ids.index(user_id)]


@dataclass(frozen=True)
class TrafficState:
    """Offered URLLC load and backlog; eMBB is modelled as fully buffered."""

    urllc_rate: float  # mean packet arrivals per slot (lambda), may vary per slot
    urllc_queue: np.ndarray  # bits backlogged, aligned with urllc_user_ids
    urllc_user_ids: tuple[int, ...]
    embb_fully_buffered: bool = True

    def __post_init__(self):
        q = _readonly(np.atleast_1d(self.urllc_queue))
        object.__setattr__(self, "urllc_queue", q)
        object.__setattr__(
            self, "urllc_user_ids", tuple(int(i) for i in self.urllc_user_ids)
        )
        if self.urllc_rate < 0:
            raise ValueError("urllc_rate must be >= 0")
        if q.shape != (len(self.urllc_user_ids),):
            raise ValueError("urllc_queue length must match urllc_user_ids")
        if np.any(q < 0):
            raise ValueError("queues must be >= 0")

    def queue_of(self, user_id: int) -> float:
        return float(self.urllc_queue[self.urllc_user_ids.index(user_id)])


@dataclass(frozen=True)
class AllocationCheck:
    """Outcome of validate_allocation; falsy when the matrix is malformed."""

    ok: bool
    reason: str = ""
    index: Optional[int] = None
    user_id: Optional[int] = None

    def __bool__(self) -> bool:
        return self.ok


class SliceCounts(NamedTuple):
    embb: int
    urllc: int
    unassigned: int


def validate_allocation(
    m: AllocationMatrix, grid: ResourceGrid, users: Iterable[UserTerminal]
) -> AllocationCheck:
    """Check shape and id membership; report the first violation found."""
    known = {u.id for u in users}
    if len(m) != grid.num_rbs:
        return AllocationCheck(
            False, f"length {len(m)} != num_rbs {grid.num_rbs}"
        )
    for b, uid in enumerate(m.assignment):
        if uid != UNASSIGNED and uid not in known:
            return AllocationCheck(
                False, f"block {b} assigned to unknown user {uid}", index=b, user_id=uid
            )
    return AllocationCheck(True)


def slice_of(m: AllocationMatrix, users: Iterable[UserTerminal]) -> SliceCounts:
    """Count resource blocks held by each service class."""
    service = {u.id: u.service for u in users}
    embb = urllc = idle = 0
    for uid in m.assignment:
        if uid == UNASSIGNED:
            idle += 1
        elif service[uid] is ServiceClass.EMBB:
            embb += 1
        elif service[uid] is ServiceClass.URLLC:
            urllc += 1
        else:  # pragma: no cover - enum is closed
            raise ValueError(f"user {uid} has unknown service class")
    return SliceCounts(embb, urllc, idle)
