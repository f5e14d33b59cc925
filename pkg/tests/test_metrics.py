import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cv2x_dcc.metrics import (CollidingGrantEvent, CollisionCause, IpgAccumulator, PdrAccumulator,
                              RxOutcome, awareness, awareness_summary, classify_collision,
                              colliding_grant_totals, ipg, ipg_cdf, mean_pdr, pdr_by_distance)
from cv2x_dcc.sbsps import Grant, SelectionContext


def test_pdr_half_in_bin():
    rows = pdr_by_distance([RxOutcome(1, 1, 120.0, True), RxOutcome(1, 2, 140.0, False)])
    assert rows == [(100.0, 150.0, 1, 2, 0.5)]


def test_pdr_clean_channel_and_empty_bins():
    outs = [RxOutcome(i, 0, 10.0, True) for i in range(5)] + [RxOutcome(9, 0, 420.0, False)]
    rows = pdr_by_distance(outs)
    assert [r[0] for r in rows] == [0.0, 400.0]  # nothing in between
    assert rows[0][4] == 1.0
    with pytest.raises(ValueError):
        pdr_by_distance(outs, 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 599.9), st.booleans()), min_size=1, max_size=300))
def test_pdr_accumulator_matches_outcome_list(pairs):
    acc = PdrAccumulator(50.0, 600.0)
    d = np.array([p[0] for p in pairs])
    ok = np.array([p[1] for p in pairs])
    acc.add(d, ok)
    ref = pdr_by_distance([RxOutcome(0, 0, x, y) for x, y in pairs])
    assert [r[:4] for r in acc.rows()] == [r[:4] for r in ref]
    for r in acc.rows():
        assert 0.0 <= r[4] <= 1.0


def test_mean_pdr_bins():
    rows = [(0, 50, 1, 1, 1.0), (200, 250, 1, 2, 0.5), (300, 350, 0, 1, 0.0)]
    assert mean_pdr(rows, 200) == pytest.approx(0.25)
    assert np.isnan(mean_pdr(rows, 600))


def test_ipg_perfect_and_alternating():
    perfect = [(1, 0, 100 * k) for k in range(10)]
    assert set(ipg(perfect).tolist()) == {100}
    alternating = [(1, 0, 100 * k) for k in range(0, 20, 2)]
    assert set(ipg(alternating).tolist()) == {200}


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 5000)),
                max_size=200, unique_by=lambda r: (r[0], r[1], r[2])))
def test_ipg_accumulator_matches_reference(events):
    events = sorted(events, key=lambda e: e[2])
    acc = IpgAccumulator(5, 5000)
    last = {}
    for rx, src, t in events:
        if (rx, src) in last:
            acc.add(np.array([rx]), src, np.array([t - last[(rx, src)]]))
        last[(rx, src)] = t
    ref = ipg(events)
    _, _, gap, count = acc.table()
    assert sorted(np.repeat(gap, count).tolist()) == sorted(ref.tolist())
    if ref.size:
        assert acc.mean() == pytest.approx(ref.mean())
        values, cdf = ipg_cdf(gap, count)
        assert cdf[-1] == pytest.approx(1.0) and np.all(np.diff(cdf) > 0)


def test_awareness_lifetime_boundary():
    d = np.array([[0.0, 250.0, 250.0], [250.0, 0.0, 500.0], [250.0, 500.0, 0.0]])
    now = 5000
    heard = np.full((3, 3), -10**9)
    heard[0, 1] = now - 1000
    heard[0, 2] = now - 1001
    veh, frac = awareness(heard, d, now)
    assert veh.tolist() == [0, 1, 2]
    assert frac[0] == 0.5
    heard[0, 2] = now - 10
    _, frac = awareness(heard, d, now)
    assert frac[0] == 1.0
    assert awareness_summary([1.0, 0.5]) == (0.75, 0.25)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_awareness_bounded(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 600, 20)
    d = np.abs(x[:, None] - x[None, :])
    heard = rng.integers(-3000, 1000, size=(20, 20))
    veh, frac = awareness(heard, d, 1000)
    assert np.all((frac >= 0) & (frac <= 1))
    for v, f in zip(veh, frac):
        ring = [j for j in range(20) if j != v and 200 <= d[v, j] <= 300]
        fresh = [j for j in ring if 1000 - heard[v, j] <= 1000]
        assert f == len(fresh) / len(ring)


def _grant(owner, created, ctx=SelectionContext.HAD_FREE, history=()):
    g = Grant(owner=owner, next_opportunity=created + 50, subchannels=range(0, 2), rri=100, rrc=10,
              created_at=created, selection_context=ctx)
    g.history.extend(history)
    return g


def test_missed_transmission_cause():
    a = _grant(0, 0, history=[(50, True), (150, False)])
    b = _grant(1, 170)  # selected after A went quiet
    assert classify_collision(a, b, 250) is CollisionCause.MT
    assert classify_collision(b, a, 250) is CollisionCause.MT


def test_no_free_cause():
    a = _grant(0, 0, history=[(50, True), (150, True)])
    b = _grant(1, 170, SelectionContext.NO_FREE)
    assert classify_collision(a, b, 250) is CollisionCause.NF


def test_simultaneous_selection_cause():
    a = _grant(0, 100)
    b = _grant(1, 120)
    assert classify_collision(a, b, 150) is CollisionCause.TSIM


def test_mt_takes_precedence_over_nf():
    a = _grant(0, 0, history=[(50, False)])
    b = _grant(1, 60, SelectionContext.NO_FREE)
    assert classify_collision(a, b, 150) is CollisionCause.MT


def test_totals():
    evs = [CollidingGrantEvent(1, 2, 0, 1, 10, c) for c in
           (CollisionCause.MT, CollisionCause.NF, CollisionCause.NF, CollisionCause.TSIM)]
    assert colliding_grant_totals(evs) == (4, 1, 2, 1)
