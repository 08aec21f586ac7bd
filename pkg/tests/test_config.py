import pytest
import yaml

from ganlab.config import RunConfig, apply_overrides, build_losses, parse_config, validate_config
from ganlab.errors import ConfigurationError, IncompatibleVersionError
from ganlab.losses import LOSSES, GradientPenalty


def minimal(**extra):
    raw = {
        "version": 1,
        "models": {"generator": {"arch": "mlp_generator"}, "discriminator": {"arch": "mlp_discriminator"}},
        "losses": [{"id": "minimax"}, {"id": "nonsaturating"}],
        "data": {"source": "synthetic_ring", "params": {"n": 256}},
    }
    raw.update(extra)
    return raw


def test_defaults_filled():
    cfg = validate_config(minimal())
    assert cfg.models["generator"].optimizer.lr == 2e-4
    assert cfg.models["generator"].optimizer.beta1 == 0.5
    assert cfg.budget.batch_size == 128 and cfg.budget.epochs == 1
    assert cfg.models["discriminator"].n_critic == 1 and cfg.seed == 0


def test_yaml_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(minimal(seed=7)))
    assert parse_config(path).seed == 7


def test_loss_hyperparameters_bound():
    cfg = validate_config(minimal(losses=[{"id": "wgangp", "params": {"penalty_weight": 10}}]))
    (loss,) = build_losses(cfg)
    assert isinstance(loss, GradientPenalty) and loss.penalty_weight == 10


def test_misspelled_key_named_with_path():
    raw = minimal()
    raw["models"]["generator"]["optimzer"] = {"lr": 1e-3}
    with pytest.raises(ConfigurationError, match=r"models\.generator\.optimzer: unknown key 'optimzer'"):
        validate_config(raw)


def test_unknown_loss_lists_known_ids():
    with pytest.raises(ConfigurationError) as info:
        validate_config(minimal(losses=[{"id": "hinge"}]))
    msg = str(info.value)
    assert "losses.0" in msg and "'hinge'" in msg
    assert all(k in msg for k in LOSSES)


def test_bad_loss_parameter_name():
    with pytest.raises(ConfigurationError, match="lambda_"):
        validate_config(minimal(losses=[{"id": "wgangp", "params": {"lambda_": 10}}]))


def test_bad_architecture_parameter():
    raw = minimal()
    raw["models"]["generator"]["params"] = {"hiden": 8}
    with pytest.raises(ConfigurationError, match="hiden"):
        validate_config(raw)


def test_missing_field_names_path():
    raw = minimal()
    del raw["data"]
    with pytest.raises(ConfigurationError, match=r"\bdata: Field required"):
        validate_config(raw)


def test_empty_losses_rejected():
    with pytest.raises(ConfigurationError, match="at least one loss"):
        validate_config(minimal(losses=[]))


@pytest.mark.parametrize("version", [0, 2, "1"])
def test_version_mismatch(version):
    with pytest.raises(IncompatibleVersionError):
        validate_config(minimal(version=version))


def test_version_required():
    raw = minimal()
    del raw["version"]
    with pytest.raises(ConfigurationError, match="version"):
        validate_config(raw)


def test_round_trip_and_digest():
    cfg = validate_config(minimal(seed=3))
    again = validate_config(cfg.resolved())
    assert again == cfg and again.digest() == cfg.digest()
    assert validate_config(minimal(seed=4)).digest() != cfg.digest()


def test_overrides():
    cfg = apply_overrides(validate_config(minimal()), seed=9, epochs=3, run_dir="/tmp/x")
    assert (cfg.seed, cfg.budget.epochs, cfg.logging.run_dir) == (9, 3, "/tmp/x")
    assert isinstance(cfg, RunConfig)


def test_not_yaml_mapping(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("- just\n- a list\n")
    with pytest.raises(ConfigurationError):
        parse_config(path)
