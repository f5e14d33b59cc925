import numpy as np
from hypothesis import given, settings, strategies as st

from cv2x_dcc.app import Cam, CamSource, TxBuffer, draw_phases, enqueue, generate_cam


def _run_source(phase, until):
    src = CamSource(0, phase)
    return [generate_cam(src, t) for t in range(until) if src.due(t)]


def test_ten_packets_per_second():
    assert len(_run_source(0, 1000)) == 10
    assert len(_run_source(99, 1000)) == 10


def test_phase_offset_times():
    assert [c.generated_at for c in _run_source(37, 300)] == [37, 137, 237]
    assert list(CamSource(0, 37).generation_times(300)) == [37, 137, 237]


def test_independent_phases():
    phases = draw_phases(50, np.random.default_rng(3))
    assert len(set(phases.tolist())) > 1
    assert phases.min() >= 0 and phases.max() < 100


def test_enqueue_replaces_older():
    buf = TxBuffer()
    assert enqueue(buf, Cam(0, 5, 0)) is False
    assert enqueue(buf, Cam(0, 6, 100)) is True
    assert buf.pending.seq == 6
    assert buf.pop().seq == 6 and not buf


def test_gated_vehicle_displaces_nine_of_ten():
    """Transmit at most once per T_off = 1000 ms while generating at 10 Hz."""
    buf, src = TxBuffer(), CamSource(0, 0)
    replaced = sent = 0
    last_tx = None
    for t in range(10_000):
        if src.due(t):
            replaced += enqueue(buf, generate_cam(src, t))
        if buf and (last_tx is None or t - last_tx >= 1000):
            buf.pop()
            sent += 1
            last_tx = t
    assert sent == 10
    # the last second's newest packet is still pending, not yet displaced
    assert replaced == 89 and buf
    assert replaced + 1 == 9 * sent


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 99), st.lists(st.booleans(), min_size=1, max_size=3000))
def test_drop_accounting(phase, service):
    """generated = transmitted + replaced + pending, and the buffer keeps the newest."""
    buf, src = TxBuffer(), CamSource(0, phase)
    sent = replaced = 0
    newest = None
    for t, serve in enumerate(service):
        if src.due(t):
            cam = generate_cam(src, t)
            newest = cam.seq
            replaced += enqueue(buf, cam)
        if buf:
            assert buf.pending.seq == newest
        if serve and buf:
            buf.pop()
            sent += 1
    assert src.generated == sent + replaced + int(bool(buf))
