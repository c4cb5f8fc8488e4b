import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distreplay.errors import InvalidSlotError, RejectedInputError
from distreplay.replay import ReplayBuffer, Transition


def tr(i, dim=2, done=False):
    return Transition(np.full(dim, float(i)), i % 3, -float(i), np.full(dim, float(i) + 0.5), done)


class ListOracle:
    """Deliberately naive FIFO store: a Python list plus a slot -> item dict."""

    def __init__(self, capacity):
        self.capacity = capacity
        self.items = []
        self.slots = {}
        self.n = 0

    def insert(self, t):
        slot = self.n % self.capacity
        evicted = self.slots.get(slot)
        self.slots[slot] = t
        self.items.append(t)
        self.items = self.items[-self.capacity:]
        self.n += 1
        return slot, evicted


def test_first_inserts_fill_slots_in_order():
    buf = ReplayBuffer(3, 2)
    for i in range(3):
        slot, evicted = buf.insert(tr(i))
        assert slot == i and evicted is None


def test_fourth_insert_evicts_oldest():
    buf = ReplayBuffer(3, 2)
    ts = [tr(i) for i in range(4)]
    for t in ts[:3]:
        buf.insert(t)
    slot, evicted = buf.insert(ts[3])
    assert slot == 0
    assert evicted.slot == 0 and evicted.transition.same_as(ts[0])
    assert buf.get(0).same_as(ts[3])


def test_len_and_capacity():
    buf = ReplayBuffer(5, 1)
    assert len(buf) == 0 and buf.capacity() == 5
    for i in range(3):
        buf.insert(tr(i, 1))
    assert len(buf) == 3
    for i in range(6):
        buf.insert(tr(i, 1))
    assert len(buf) == 5 and buf.is_full()


def test_get_unoccupied_slot_raises():
    buf = ReplayBuffer(4, 2)
    buf.insert(tr(0))
    with pytest.raises(InvalidSlotError):
        buf.get(1)
    with pytest.raises(InvalidSlotError):
        buf.get(-1)


@pytest.mark.parametrize(
    "t",
    [
        Transition(np.zeros(3), 0, 0.0, np.zeros(2), False),
        Transition(np.zeros(2), 0, 0.0, np.zeros(3), False),
        Transition(np.zeros(2), -1, 0.0, np.zeros(2), False),
    ],
)
def test_rejects_malformed_transitions(t):
    buf = ReplayBuffer(4, 2)
    with pytest.raises(RejectedInputError):
        buf.insert(t)
    assert len(buf) == 0


def test_get_returns_copies():
    buf = ReplayBuffer(2, 2)
    buf.insert(tr(1))
    got = buf.get(0)
    got.state[0] = 99.0
    assert buf.get(0).state[0] == 1.0


def test_hundred_inserts_capacity_ten_match_last_ten():
    rng = np.random.default_rng(0)
    buf, oracle = ReplayBuffer(10, 3), ListOracle(10)
    for i in range(100):
        t = Transition(rng.normal(size=3), int(rng.integers(4)), float(rng.normal()), rng.normal(size=3), bool(i % 7 == 0))
        buf.insert(t)
        oracle.insert(t)
    assert len(buf) == 10
    stored = [buf.get(s) for s in range(10)]
    # Same multiset: every oracle item matches exactly one stored transition.
    unmatched = list(stored)
    for t in oracle.items:
        j = next(j for j, u in enumerate(unmatched) if u.same_as(t))
        unmatched.pop(j)
    assert unmatched == []


@settings(max_examples=60, deadline=None)
@given(
    capacity=st.integers(1, 12),
    ops=st.lists(st.one_of(st.just("insert"), st.integers(0, 15)), max_size=120),
)
def test_random_insert_get_interleaving_matches_oracle(capacity, ops):
    buf, oracle = ReplayBuffer(capacity, 2), ListOracle(capacity)
    counter = 0
    for op in ops:
        if op == "insert":
            t = tr(counter)
            counter += 1
            slot, evicted = buf.insert(t)
            o_slot, o_evicted = oracle.insert(t)
            assert slot == o_slot
            assert (evicted is None) == (o_evicted is None)
            if evicted is not None:
                assert evicted.transition.same_as(o_evicted)
        elif op in oracle.slots:
            assert buf.get(op).same_as(oracle.slots[op])
        else:
            with pytest.raises(InvalidSlotError):
                buf.get(op)
    assert len(buf) == min(counter, capacity)


@settings(max_examples=40, deadline=None)
@given(capacity=st.integers(1, 8), n=st.integers(0, 30))
def test_insert_touches_only_its_slot(capacity, n):
    buf = ReplayBuffer(capacity, 2)
    for i in range(n):
        before = {s: buf.get(s) for s in range(len(buf))}
        slot, _ = buf.insert(tr(i))
        for s, t in before.items():
            if s != slot:
                assert buf.get(s).same_as(t)


def test_batch_gathers_columns():
    buf = ReplayBuffer(4, 2)
    for i in range(4):
        buf.insert(tr(i, done=i == 2))
    b = buf.batch(np.array([2, 0, 2]))
    np.testing.assert_array_equal(b.states[:, 0], [2.0, 0.0, 2.0])
    np.testing.assert_array_equal(b.actions, [2, 0, 2])
    np.testing.assert_array_equal(b.dones, [True, False, True])
    assert buf.batch(np.array([1]), states=False).states is None
