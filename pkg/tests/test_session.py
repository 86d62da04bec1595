import numpy as np
import pytest

from splitwire.codec import wire_header_bytes
from splitwire.errors import ArgumentError, TransportError
from splitwire.latency import ChannelModel, ExecutionProfile, PayloadSizes, total_delay
from splitwire.pipeline.filtergate import FilterModel
from splitwire.pipeline.session import make_stream, run_session

PROF = ExecutionProfile(t_local=2.0, t_edge_full=0.05, t_head=0.08,
                        t_tail=0.04, t_filter_extra=0.004)
CH = ChannelModel(5e6)

# every empty image scores far below any threshold; non-empty far above
SHARP_FM = FilterModel(threshold=0.1, p_empty=0.5, mu_empty=-30.0,
                       sigma_empty=0.1, mu_nonempty=30.0, sigma_nonempty=0.1)


def test_all_empty_stream_sends_nothing():
    images = [(img, True) for img, _ in make_stream(100, [3, 16, 16], 1.0, seed=1)]
    log = run_session(images, PROF, CH, SHARP_FM, mode="simulated", seed=2)
    assert log.total_bytes == 0
    assert log.drop_rate == 1.0
    expected = PROF.t_head + PROF.t_filter_extra
    assert all(r.total == expected for r in log.records)
    assert all(r.t_tail == 0.0 and r.bytes_sent == 0 for r in log.records)


def test_simulated_mean_matches_scnf_closed_form():
    images = make_stream(400, [3, 24, 24], 0.5, seed=3)
    log = run_session(images, PROF, CH, SHARP_FM, mode="simulated", seed=4)
    assert 0.0 < log.drop_rate < 1.0
    frame_bytes = next(r.bytes_sent for r in log.records if not r.filtered)
    sizes = PayloadSizes(10 ** 9, frame_bytes, 2 * frame_bytes, 4 * frame_bytes)
    formula = total_delay("SCNF", PROF, CH, sizes, width=8,
                          p_drop=log.drop_rate).total
    assert abs(log.mean_total - formula) < 1e-9


def test_bytes_conservation():
    images = make_stream(120, [3, 10, 10], 0.4, seed=5)
    log = run_session(images, PROF, CH, SHARP_FM, mode="simulated", seed=6)
    kept = [r for r in log.records if not r.filtered]
    frame = 3 * 10 * 10 + wire_header_bytes(3)
    assert all(r.bytes_sent == frame for r in kept)
    assert log.total_bytes == frame * len(kept)


def test_filtered_records_carry_no_uplink_or_tail():
    images = make_stream(200, [3, 8, 8], 0.6, seed=7)
    log = run_session(images, PROF, CH, SHARP_FM, mode="simulated", seed=8)
    for r in log.records:
        if r.filtered:
            assert r.bytes_sent == 0 and r.t_uplink == 0.0 and r.t_tail == 0.0
        else:
            assert r.bytes_sent > 0 and r.t_uplink > 0.0 and r.t_tail == PROF.t_tail


def test_simulated_log_is_byte_identical_per_seed(tmp_path):
    images = make_stream(60, [3, 12, 12], 0.5, seed=9)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_session(images, PROF, CH, SHARP_FM, mode="simulated", seed=10).to_csv(str(a))
    run_session(images, PROF, CH, SHARP_FM, mode="simulated", seed=10).to_csv(str(b))
    assert a.read_bytes() == b.read_bytes()


def test_session_csv_columns(tmp_path):
    images = make_stream(5, [3, 4, 4], 0.5, seed=11)
    log = run_session(images, PROF, CH, SHARP_FM, mode="simulated", seed=12)
    path = tmp_path / "log.csv"
    log.to_csv(str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "image_id,filtered,bytes_sent,t_head,t_uplink,t_tail,total"
    assert len(lines) == 6


def test_widths_16_and_32_change_frame_size():
    images = make_stream(10, [3, 6, 6], 0.0, seed=13)
    logs = {w: run_session(images, PROF, CH, SHARP_FM, mode="simulated",
                           seed=14, width=w) for w in (8, 16, 32)}
    sizes = {w: logs[w].records[0].bytes_sent for w in (8, 16, 32)}
    numel = 3 * 6 * 6
    header = wire_header_bytes(3)
    assert sizes == {8: numel + header, 16: 2 * numel + header,
                     32: 4 * numel + header}


def test_make_stream_respects_prior_and_determinism():
    stream = make_stream(2000, [3, 2, 2], 0.46, seed=15)
    frac_empty = np.mean([empty for _, empty in stream])
    assert frac_empty == pytest.approx(0.46, abs=0.04)
    again = make_stream(2000, [3, 2, 2], 0.46, seed=15)
    assert all(a[1] == b[1] and a[0] == b[0] for a, b in zip(stream, again))


def test_argument_validation():
    with pytest.raises(ArgumentError):
        make_stream(0, [3, 2, 2], 0.5, seed=1)
    images = make_stream(3, [3, 2, 2], 0.5, seed=1)
    with pytest.raises(ArgumentError):
        run_session(images, PROF, CH, SHARP_FM, mode="carrier-pigeon")
    with pytest.raises(ArgumentError):
        run_session([], PROF, CH, SHARP_FM)
    with pytest.raises(ArgumentError):
        run_session(images, PROF, CH, SHARP_FM, mode="socket", server_addr=None)


def test_socket_mode_without_server_raises_transport_error():
    images = make_stream(2, [3, 2, 2], 0.0, seed=16)
    with pytest.raises(TransportError):
        run_session(images, PROF, CH, SHARP_FM, mode="socket",
                    server_addr=("127.0.0.1", 1), connect_timeout_s=0.5)
