import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from ganlab.errors import ContractError, NumericError
from ganlab.logger import (
    ConsoleBackend,
    JsonlBackend,
    LogRecord,
    Logger,
    MemoryBackend,
    build_logger,
    read_jsonl,
    to_pixels,
)

KEYS = {"kind", "name", "step", "epoch", "value", "wall_time"}


def test_scalar_jsonl_line(tmp_path):
    log = build_logger(["jsonl"], tmp_path)
    log.log_scalar("minimax:D", 1.3863, 10, 0)
    log.flush()
    (line,) = (tmp_path / "log.jsonl").read_text().splitlines()
    rec = json.loads(line)
    assert set(rec) == KEYS
    assert (rec["kind"], rec["name"], rec["step"], rec["epoch"], rec["value"]) == ("scalar", "minimax:D", 10, 0, 1.3863)


@pytest.mark.parametrize("bad", [math.nan, math.inf])
def test_non_finite_scalar_rejected(bad):
    with pytest.raises(NumericError):
        Logger([MemoryBackend()]).log_scalar("x", bad, 0, 0)


def test_fan_out_to_all_backends():
    a, b = MemoryBackend(), MemoryBackend()
    Logger([a, b]).log_scalar("x", 1.0, 0, 0)
    assert len(a.records) == len(b.records) == 1


def test_console_backend_format():
    buf = io.StringIO()
    Logger([ConsoleBackend(buf)]).log_scalar("loss:G", 0.5, 3, 1)
    assert "loss:G" in buf.getvalue() and "step 3" in buf.getvalue()


def test_steps_must_not_decrease():
    log = Logger([MemoryBackend()])
    log.log_scalar("x", 1.0, 5, 0)
    log.log_scalar("y", 1.0, 5, 0)
    with pytest.raises(ContractError):
        log.log_scalar("x", 1.0, 4, 0)


def test_scalar_cadence():
    mem = MemoryBackend()
    log = Logger([mem], scalar_every=3)
    for step in range(9):
        log.log_scalar("x", float(step), step, 0)
    assert [r.step for r in mem.records] == [0, 3, 6]


def test_metric_with_std():
    mem = MemoryBackend()
    Logger([mem]).log_metric("classifier_score", 3.2, 100, 2, std=0.1)
    assert [(r.kind, r.name, r.value) for r in mem.records] == [
        ("metric", "classifier_score", 3.2),
        ("metric", "classifier_score:std", 0.1),
    ]


@given(
    st.sampled_from(["scalar", "metric", "event", "image_grid"]),
    st.text(min_size=1),
    st.integers(0, 2**40),
    st.integers(0, 10**6),
    st.one_of(st.floats(allow_nan=False, allow_infinity=False), st.text()),
    st.floats(0, 2e9),
)
def test_record_round_trip(kind, name, step, epoch, value, wall):
    rec = LogRecord(kind, name, step, epoch, value, wall)
    assert LogRecord.from_json(rec.to_json()) == rec


def test_flush_durability_and_idempotence(tmp_path):
    log = build_logger(["jsonl"], tmp_path)
    log.flush()
    assert not (tmp_path / "log.jsonl").exists()
    for i in range(100):
        log.log_scalar("x", i * 0.5, i, 0)
    log.flush()
    log.flush()
    recs = read_jsonl(tmp_path / "log.jsonl")
    assert len(recs) == 100 and recs[-1].value == 49.5
    log.close()


def test_pixel_mapping():
    px, clamped = to_pixels(np.array([-1.0, 1.0, 0.0]))
    assert px.tolist() == [0, 255, 128] and clamped == 0


def test_image_grid_layout(tmp_path):
    mem = MemoryBackend()
    log = Logger([mem], run_dir=tmp_path)
    images = np.stack([np.full((1, 2, 3), -1 + 2 * i / 15) for i in range(16)])
    path = log.log_image_grid("G", images, step=7, ncols=4)
    assert path == tmp_path / "samples" / "G_7.png"
    grid = np.asarray(Image.open(path))
    assert grid.shape == (4 * 2, 4 * 3)
    expected, _ = to_pixels(images)
    assert grid[2, 3] == expected[5, 0, 0, 0]  # row 1, column 1 -> tile 5
    assert mem.records[-1].kind == "image_grid" and mem.records[-1].value == str(path)


def test_image_grid_partial_row_and_rgb(tmp_path):
    log = Logger([MemoryBackend()], run_dir=tmp_path)
    path = log.log_image_grid("rgb", np.zeros((5, 3, 4, 4)), 0, ncols=4)
    assert Image.open(path).size == (16, 8)
    assert Image.open(path).mode == "RGB"


def test_clamping_emits_warning(tmp_path):
    mem = MemoryBackend()
    Logger([mem], run_dir=tmp_path).log_image_grid("G", np.full((2, 1, 2, 2), 1.5), 0, ncols=2)
    warn = mem.records[-1]
    assert warn.kind == "event" and warn.name == "warning" and "8" in warn.value


def test_null_logger_writes_nothing(tmp_path):
    log = build_logger(["null"], tmp_path)
    assert not log.enabled
    log.log_scalar("x", 1.0, 0, 0)
    log.log_metric("m", 1.0, 0, 0)
    assert log.log_image_grid("G", np.zeros((1, 1, 2, 2)), 0) is None
    log.flush()
    log.close()
    assert list(tmp_path.iterdir()) == []


def test_unknown_backend():
    with pytest.raises(ContractError):
        build_logger(["tensorboard"])


def test_jsonl_lazy_open(tmp_path):
    backend = JsonlBackend(tmp_path / "sub" / "log.jsonl")
    backend.close()
    assert not (tmp_path / "sub").exists()
