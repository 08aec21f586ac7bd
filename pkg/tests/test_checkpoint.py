import struct

import pytest
import torch

from ganlab import MinimaxDiscriminatorLoss, NonSaturatingGeneratorLoss, Trainer
from ganlab.checkpoint import FORMAT_VERSION, MAGIC, read_checkpoint, write_checkpoint
from ganlab.data import synthetic_ring
from ganlab.errors import FormatError, IncompatibleVersionError, IntegrityError
from ganlab.models import MLPDiscriminator, MLPGenerator


def trained(seed=0, steps=7):
    torch.manual_seed(seed)
    trainer = Trainer(
        {"generator": MLPGenerator(hidden=8), "discriminator": MLPDiscriminator(hidden=8)},
        [MinimaxDiscriminatorLoss(), NonSaturatingGeneratorLoss()],
        data=synthetic_ring(128), batch_size=32, seed=seed,
    )
    trainer.train_steps(steps)
    return trainer


def test_payload_round_trip(tmp_path):
    payload = {"a": torch.arange(5.0), "nested": {"k": 0.25, "names": ["x", "y"]}}
    path = write_checkpoint(tmp_path / "c.ckpt", payload)
    out = read_checkpoint(path)
    assert torch.equal(out["a"], payload["a"]) and out["nested"] == payload["nested"]
    assert not (tmp_path / "c.ckpt.tmp").exists()


def test_trainer_round_trip_bit_identical(tmp_path):
    a = trained()
    path = a.save_checkpoint(tmp_path / "t.ckpt", extra={"note": "hi"})
    b = trained(seed=5, steps=1).load_checkpoint(path)
    for name in a.entries:
        for k, v in a.entries[name].model.state_dict().items():
            assert torch.equal(v, b.entries[name].model.state_dict()[k])
        sa, sb = a.entries[name].optimizer.state_dict(), b.entries[name].optimizer.state_dict()
        assert sa["step"] == sb["step"]
        for p in sa["state"]:
            for s in sa["state"][p]:
                assert torch.equal(sa["state"][p][s], sb["state"][p][s])
    assert b.state.global_step == 7 and b.state.history == a.state.history
    assert torch.equal(a.rng.get_state(), b.rng.get_state())
    manifest = read_checkpoint(path)["manifest"]
    assert manifest["format_version"] == FORMAT_VERSION and manifest["global_step"] == 7
    assert read_checkpoint(path)["extra"] == {"note": "hi"}


def test_corrupted_byte(tmp_path):
    path = trained().save_checkpoint(tmp_path / "t.ckpt")
    data = bytearray(path.read_bytes())
    data[-10] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(IntegrityError):
        read_checkpoint(path)


@pytest.mark.parametrize("keep", [5, 30, -1])
def test_truncated(tmp_path, keep):
    path = trained().save_checkpoint(tmp_path / "t.ckpt")
    data = path.read_bytes()
    path.write_bytes(data[:keep])
    with pytest.raises(IntegrityError):
        read_checkpoint(path)


def test_version_mismatch(tmp_path):
    path = write_checkpoint(tmp_path / "v.ckpt", {"x": 1})
    data = bytearray(path.read_bytes())
    struct.pack_into(">I", data, len(MAGIC), FORMAT_VERSION + 1)
    path.write_bytes(bytes(data))
    with pytest.raises(IncompatibleVersionError, match=str(FORMAT_VERSION + 1)):
        read_checkpoint(path)


def test_not_a_checkpoint(tmp_path):
    path = tmp_path / "x.ckpt"
    path.write_bytes(b"PK\x03\x04" + bytes(100))
    with pytest.raises(FormatError):
        read_checkpoint(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_checkpoint(tmp_path / "absent.ckpt")
