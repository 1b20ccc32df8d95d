import itertools
import math

import numpy as np
import pytest

from twinslice.domain import (
    AllocationMatrix,
    QoSRequirement,
    ResourceGrid,
    ServiceClass,
    validate_allocation,
)
from twinslice.nn import MLP, FeatureScaling, feature_dim
from twinslice.policy import (
    OrthogonalConfig,
    allocation_objective,
    dynamic_allocate,
    oracle_allocate,
    orthogonal_allocate,
    predicted_urllc_rate,
    priority_repair,
)

from conftest import make_snapshot, make_users


def test_orthogonal_half_split_is_fixed_over_slots():
    users = make_users(2, 2)
    grid = ResourceGrid(10, 1e5)
    rng = np.random.default_rng(0)
    urllc_sets = []
    for _ in range(5):
        snap = make_snapshot(rng.exponential(1.0, (4, 10)), users)
        d = orthogonal_allocate(snap, OrthogonalConfig(0.5), grid, users, 1e-3)
        held = {
            b
            for b, uid in enumerate(d.allocation.assignment)
            if uid in (2, 3)  # URLLC ids
        }
        urllc_sets.append(frozenset(held))
    assert all(s == frozenset(range(5)) for s in urllc_sets)


def test_orthogonal_fraction_zero_gives_everything_to_embb():
    users = make_users(2, 1)
    snap = make_snapshot(np.ones((3, 4)), users)
    d = orthogonal_allocate(snap, OrthogonalConfig(0.0), ResourceGrid(4, 1e5), users, 1e-3)
    assert all(uid in (0, 1) for uid in d.allocation.assignment)


def test_orthogonal_fraction_one_single_urllc_user_takes_all():
    users = make_users(1, 1)
    snap = make_snapshot(np.ones((2, 4)), users)
    d = orthogonal_allocate(snap, OrthogonalConfig(1.0), ResourceGrid(4, 1e5), users, 1e-3)
    assert d.allocation.assignment == (1, 1, 1, 1)


def test_orthogonal_requires_users_for_nonempty_partitions():
    users = make_users(1, 0)
    snap = make_snapshot(np.ones((1, 4)), users)
    with pytest.raises(ValueError, match="URLLC"):
        orthogonal_allocate(snap, OrthogonalConfig(0.5), ResourceGrid(4, 1e5), users, 1e-3)


def test_oracle_single_user_gets_every_block():
    users = make_users(1, 0)
    snap = make_snapshot([[0.5, 2.0, 1.0]], users)
    d = oracle_allocate(snap, ResourceGrid(3, 1e5), users, QoSRequirement(), 1e-3)
    assert d.allocation.assignment == (0, 0, 0)


def test_oracle_two_by_two_matches_enumeration():
    # Independent oracle: enumerate all four assignments by hand.
    users = make_users(2, 0)
    snap = make_snapshot([[5.0, 1.0], [1.0, 5.0]], users, lam=0.0)
    grid = ResourceGrid(2, 1e5)
    d = oracle_allocate(snap, grid, users, QoSRequirement(), 1e-3, mode="exhaustive")
    assert d.allocation.assignment == (0, 1)

    best = max(
        itertools.product((0, 1), repeat=2),
        key=lambda combo: sum(
            1e5 * 1e-3 * math.log2(1.0 + snap.channel.snr[uid][b])
            for b, uid in enumerate(combo)
        ),
    )
    assert d.allocation.assignment == best


def _independent_objective(m, snap, grid, users, qos, tau, penalty):
    """Straight-line re-derivation of the documented objective."""
    total = 0.0
    urllc = 0.0
    embb_def = 0.0
    for u in users:
        row = snap.channel.row(u.id)
        r = 0.0
        for b, uid in enumerate(m):
            if uid == u.id:
                r += grid.rb_bandwidth * math.log2(1.0 + row[b]) * tau
        total += r
        if u.service is ServiceClass.URLLC:
            urllc += r
        else:
            embb_def += max(0.0, qos.embb_min_rate * tau - r)
    load = qos.urllc_packet_bits * snap.traffic.urllc_rate
    return total - penalty * max(0.0, load - urllc) - penalty * embb_def


def test_oracle_exhaustive_matches_independent_enumeration():
    rng = np.random.default_rng(17)
    grid = ResourceGrid(3, 1e5)
    qos = QoSRequirement(embb_min_rate=2e4)
    users = make_users(2, 1)
    penalty = 1e7
    for _ in range(50):
        snap = make_snapshot(rng.exponential(2.0, (3, 3)), users, lam=rng.uniform(0, 4))
        d = oracle_allocate(
            snap, grid, users, qos, 1e-3, mode="exhaustive", penalty_weight=penalty
        )
        best_obj = -math.inf
        best = None
        for combo in itertools.product((0, 1, 2), repeat=3):
            obj = _independent_objective(combo, snap, grid, users, qos, 1e-3, penalty)
            if obj > best_obj:
                best_obj = obj
                best = combo
        assert d.allocation.assignment == best
        assert d.objective_estimate == best_obj


def test_greedy_close_to_exhaustive_and_never_above():
    rng = np.random.default_rng(23)
    grid = ResourceGrid(4, 1e5)
    qos = QoSRequirement()
    users = make_users(2, 1)
    close = 0
    for _ in range(100):
        snap = make_snapshot(rng.exponential(3.0, (3, 4)), users, lam=3.0)
        ex = oracle_allocate(snap, grid, users, qos, 1e-3, mode="exhaustive")
        gr = oracle_allocate(snap, grid, users, qos, 1e-3, mode="greedy")
        assert ex.objective_estimate >= gr.objective_estimate - 1e-9
        if gr.objective_estimate >= ex.objective_estimate - 0.05 * abs(ex.objective_estimate):
            close += 1
    assert close >= 95


def test_oracle_cap_enforced_in_exhaustive_mode():
    users = make_users(3, 1)
    snap = make_snapshot(np.ones((4, 7)), users)
    with pytest.raises(ValueError, match="cap"):
        oracle_allocate(
            snap, ResourceGrid(7, 1e5), users, QoSRequirement(), 1e-3, mode="exhaustive"
        )


def test_oracle_optimality_by_enumeration():
    # No other allocation may beat the exhaustive oracle's objective.
    rng = np.random.default_rng(31)
    grid = ResourceGrid(3, 1e5)
    users = make_users(1, 1)
    qos = QoSRequirement()
    for _ in range(30):
        snap = make_snapshot(rng.exponential(1.0, (2, 3)), users, lam=rng.uniform(0, 3))
        d = oracle_allocate(snap, grid, users, qos, 1e-3, mode="exhaustive")
        for combo in itertools.product((0, 1), repeat=3):
            obj = allocation_objective(
                AllocationMatrix(combo), snap, grid, users, qos, 1e-3
            )
            assert obj <= d.objective_estimate + 1e-9


def test_scale_free_argmax_with_zero_penalties():
    # With no QoS pressure, scaling every SNR must not move the argmax.
    rng = np.random.default_rng(37)
    grid = ResourceGrid(3, 1e5)
    users = make_users(2, 1)
    qos = QoSRequirement()
    for _ in range(30):
        snr = rng.exponential(1.0, (3, 3))
        a = oracle_allocate(
            make_snapshot(snr, users, lam=0.0), grid, users, qos, 1e-3,
            mode="exhaustive", penalty_weight=0.0,
        )
        b = oracle_allocate(
            make_snapshot(snr * 7.5, users, lam=0.0), grid, users, qos, 1e-3,
            mode="exhaustive", penalty_weight=0.0,
        )
        assert a.allocation.assignment == b.allocation.assignment


def test_dynamic_zero_net_sends_every_block_to_lowest_id():
    users = make_users(2, 1)
    grid = ResourceGrid(4, 1e5)
    net = MLP.zeros([feature_dim(3, 4), 8, 12], (4, 3))
    snap = make_snapshot(np.ones((3, 4)), users)
    d = dynamic_allocate(
        snap, net, grid, users, QoSRequirement(), FeatureScaling(), 1e-3
    )
    assert d.allocation.assignment == (0, 0, 0, 0)
    assert validate_allocation(d.allocation, grid, users)


def test_dynamic_is_deterministic(tiny_trained):
    scen = tiny_trained["scenario"]
    users = scen.users()
    rng = np.random.default_rng(3)
    snap = make_snapshot(rng.exponential(1.0, (3, 4)), users, lam=2.0)
    kwargs = dict(
        grid=scen.grid, users=users, qos=scen.qos,
        scaling=scen.scaling(), slot_duration=scen.slot_duration,
    )
    a = dynamic_allocate(snap, tiny_trained["net"], **kwargs)
    b = dynamic_allocate(snap, tiny_trained["net"], **kwargs)
    assert a.allocation.assignment == b.allocation.assignment


def test_trained_net_imitates_oracle_on_training_set(tiny_trained):
    from twinslice import nn

    acc = nn.accuracy(
        tiny_trained["net"], tiny_trained["X_train"], tiny_trained["labels_train"]
    )
    assert acc >= 0.90


def test_repair_noop_when_constraint_already_met():
    users = make_users(1, 1)
    grid = ResourceGrid(2, 1e5)
    snap = make_snapshot([[1.0, 1.0], [3.0, 3.0]], users, lam=1.0)
    base = oracle_allocate(snap, grid, users, QoSRequirement(), 1e-3)
    repaired = priority_repair(base, snap, QoSRequirement(), grid, users, 1e-3)
    assert repaired.allocation.assignment == base.allocation.assignment
    assert not repaired.constraint_unmet
    assert repaired.policy_id == "oracle+repair"


def test_repair_noop_at_zero_lambda():
    users = make_users(1, 1)
    grid = ResourceGrid(2, 1e5)
    snap = make_snapshot([[1.0, 1.0], [0.1, 0.1]], users, lam=0.0)
    d = orthogonal_allocate(snap, OrthogonalConfig(0.0), grid, users, 1e-3)
    repaired = priority_repair(d, snap, QoSRequirement(), grid, users, 1e-3)
    assert repaired.allocation.assignment == d.allocation.assignment


def test_repair_flags_exhaustion_when_all_blocks_urllc():
    users = make_users(0, 1)
    grid = ResourceGrid(2, 1e5)
    # tiny SNR: even all blocks cannot carry the load
    snap = make_snapshot([[1e-6, 1e-6]], users, lam=1000.0)
    base = oracle_allocate(snap, grid, users, QoSRequirement(), 1e-3)
    repaired = priority_repair(base, snap, QoSRequirement(), grid, users, 1e-3)
    assert repaired.allocation.assignment == base.allocation.assignment
    assert repaired.constraint_unmet


def test_repair_monotone_and_never_touches_urllc_blocks():
    rng = np.random.default_rng(41)
    users = make_users(2, 2)
    grid = ResourceGrid(6, 1e5)
    qos = QoSRequirement()
    for _ in range(50):
        snap = make_snapshot(
            rng.exponential(1.0, (4, 6)), users, lam=rng.uniform(0, 30)
        )
        base = orthogonal_allocate(snap, OrthogonalConfig(1 / 3), grid, users, 1e-3)
        repaired = priority_repair(base, snap, qos, grid, users, 1e-3)
        before = predicted_urllc_rate(base.allocation, snap, grid, users, 1e-3)
        after = predicted_urllc_rate(repaired.allocation, snap, grid, users, 1e-3)
        assert after >= before - 1e-9
        for b, uid in enumerate(base.allocation.assignment):
            if uid in (2, 3):  # URLLC-held stays put
                assert repaired.allocation.assignment[b] == uid
        n_embb = sum(1 for u in base.allocation.assignment if u in (0, 1))
        n_embb_after = sum(1 for u in repaired.allocation.assignment if u in (0, 1))
        assert n_embb_after <= n_embb


def test_policy_outputs_always_validate_fuzz():
    # 10,000 random decisions across the three allocators stay well-formed.
    rng = np.random.default_rng(53)
    users = make_users(2, 1)
    grid = ResourceGrid(4, 1e5)
    qos = QoSRequirement()
    net = MLP.glorot([feature_dim(3, 4), 16, 12], (4, 3), seed=0)
    scaling = FeatureScaling()
    cfg = OrthogonalConfig(0.5)
    for i in range(2500):
        snap = make_snapshot(
            rng.exponential(1.0, (3, 4)), users, lam=rng.uniform(0, 10)
        )
        d1 = orthogonal_allocate(snap, cfg, grid, users, 1e-3)
        d2 = oracle_allocate(snap, grid, users, qos, 1e-3, mode="greedy")
        d3 = dynamic_allocate(snap, net, grid, users, qos, scaling, 1e-3)
        d4 = priority_repair(d3, snap, qos, grid, users, 1e-3)
        for d in (d1, d2, d3, d4):
            assert validate_allocation(d.allocation, grid, users)
