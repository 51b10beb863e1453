import json
import zipfile
from dataclasses import replace

import pytest
import torch

from fsmnet.errors import CheckpointError, ConfigError
from fsmnet.losses import total_loss
from fsmnet.model import (
    FSMNet,
    ModelConfig,
    build_model,
    expected_param_count,
    gradient_coverage_gaps,
    load_checkpoint,
    save_checkpoint,
)

from gradcheck import compare_gradients

SMALL = ModelConfig(base_channels=4, stages=2)


def rand(shape, seed, dtype=torch.float32):
    gen = torch.Generator().manual_seed(seed)
    return torch.rand(shape, generator=gen, dtype=dtype)


def param_bytes(model):
    return b"".join(p.detach().numpy().tobytes() for p in model.parameters())


class TestConfig:
    def test_defaults_valid(self):
        ModelConfig().validate()

    @pytest.mark.parametrize(
        "field,value",
        [
            ("stages", 0),
            ("base_channels", 1),
            ("residual_blocks_per_fsfe", 0),
            ("heads", 3),
            ("cms_mode", "other"),
            ("fs_mode", "concat"),
        ],
    )
    def test_invalid_fields(self, field, value):
        with pytest.raises(ConfigError):
            replace(ModelConfig(), **{field: value}).validate()

    def test_from_dict_rejects_unknown(self):
        with pytest.raises(ConfigError, match="unknown"):
            ModelConfig.from_dict({"width": 8})

    def test_roundtrip_dict(self):
        cfg = ModelConfig(base_channels=4, cms_mode="sum")
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg


class TestBuild:
    def test_deterministic_parameter_bytes(self):
        a = build_model(SMALL, seed=5)
        b = build_model(SMALL, seed=5)
        assert param_bytes(a) == param_bytes(b)
        c = build_model(SMALL, seed=6)
        assert param_bytes(a) != param_bytes(c)

    @pytest.mark.parametrize(
        "config",
        [
            ModelConfig(),
            ModelConfig(base_channels=4, stages=2, heads=2),
            ModelConfig(base_channels=4, stages=2, cms_mode="concat", fs_mode="sum"),
            ModelConfig(base_channels=4, stages=2, use_fsfe_frequency=False),
            ModelConfig(base_channels=2, stages=1, residual_blocks_per_fsfe=1),
        ],
    )
    def test_param_count_matches_closed_form(self, config):
        model = FSMNet(config)
        assert sum(p.numel() for p in model.parameters()) == expected_param_count(config)

    def test_minimal_model_smoke(self):
        model = build_model(ModelConfig(base_channels=2), seed=0)
        out = model(rand((1, 1, 16, 16), 0), rand((1, 1, 16, 16), 1))
        assert out.i_spa.shape == (1, 1, 16, 16)

    def test_biases_zero_weights_bounded(self):
        model = build_model(SMALL, seed=0)
        for name, p in model.named_parameters():
            if p.ndim == 1:
                assert p.abs().max() == 0.0, name
            else:
                fan_in = p.shape[1] * p.shape[2] * p.shape[3]
                assert p.abs().max() <= fan_in**-0.5

    def test_no_dead_parameters(self):
        model = build_model(SMALL, seed=1)
        assert gradient_coverage_gaps(model, seed=0) == []

    def test_diagnostic_build(self):
        build_model(SMALL, seed=2, diagnostic=True)


class TestForward:
    def test_output_shapes(self):
        model = build_model(ModelConfig(), seed=0)
        out = model(rand((2, 1, 32, 32), 0), rand((2, 1, 32, 32), 1))
        assert out.i_spa.shape == (2, 1, 32, 32)
        assert out.i_fre.shape == (2, 1, 32, 32)

    def test_global_residual_identity_with_zero_heads(self):
        model = build_model(SMALL, seed=3)
        with torch.no_grad():
            model.head_spatial.weight.zero_()
            model.head_spatial.bias.zero_()
            model.head_frequency.weight.zero_()
            model.head_frequency.bias.zero_()
        x = rand((1, 1, 32, 32), 4)
        out = model(x, rand((1, 1, 32, 32), 5))
        assert torch.equal(out.i_spa, x)
        assert torch.equal(out.i_fre, x)

    def test_forward_deterministic(self):
        x, aux = rand((1, 1, 32, 32), 6), rand((1, 1, 32, 32), 7)
        out1 = build_model(SMALL, seed=8)(x, aux)
        out2 = build_model(SMALL, seed=8)(x, aux)
        assert torch.equal(out1.i_spa, out2.i_spa)
        assert torch.equal(out1.i_fre, out2.i_fre)

    def test_shape_validation(self):
        model = build_model(SMALL, seed=0)
        with pytest.raises(ValueError, match="disagree"):
            model(rand((1, 1, 32, 32), 0), rand((1, 1, 16, 16), 1))
        with pytest.raises(ValueError, match="B, 1, H, W"):
            model(rand((1, 2, 32, 32), 0), rand((1, 2, 32, 32), 1))
        with pytest.raises(ValueError, match="odd intermediate"):
            model(rand((1, 1, 12, 12), 0), rand((1, 1, 12, 12), 1))

    @pytest.mark.parametrize(
        "switches",
        [
            {"use_fsfe_frequency": False},
            {"cms_mode": "sum"},
            {"cms_mode": "concat"},
            {"fs_mode": "sum"},
        ],
    )
    def test_each_switch_changes_output(self, switches):
        x, aux = rand((1, 1, 32, 32), 9), rand((1, 1, 32, 32), 10)
        base = build_model(SMALL, seed=11)(x, aux)
        variant = build_model(replace(SMALL, **switches), seed=11)(x, aux)
        assert not torch.equal(base.i_spa, variant.i_spa)

    def test_full_switch_off_has_no_fusion_or_frequency_params(self):
        config = replace(SMALL, use_fsfe_frequency=False, cms_mode="concat", fs_mode="sum")
        model = FSMNet(config)
        names = [name for name, _ in model.named_parameters()]
        assert not any("frequency_branch" in n for n in names)
        assert not any(".fs." in n for n in names)
        assert any("cms_spatial.fuse_conv" in n for n in names)
        out = model(rand((1, 1, 32, 32), 0), rand((1, 1, 32, 32), 1))
        assert out.i_spa.shape == (1, 1, 32, 32)

    def test_internals_collection(self):
        model = build_model(SMALL, seed=12)
        internals = {}
        model(rand((1, 1, 32, 32), 13), rand((1, 1, 32, 32), 14), internals=internals)
        assert "encoder0.cms_spatial.gate_primary" in internals
        assert "encoder0.fs.attention_spatial" in internals
        assert "neck.fs.attention_frequency" in internals
        assert "decoder1.fs.attention_spatial" in internals

    def test_gradients_match_finite_differences(self):
        model = build_model(ModelConfig(base_channels=4), seed=15).double()
        x = rand((1, 1, 16, 16), 16, dtype=torch.float64)
        aux = rand((1, 1, 16, 16), 17, dtype=torch.float64)
        gt = rand((1, 1, 16, 16), 18, dtype=torch.float64)

        def loss_fn():
            return total_loss(model(x, aux), gt).total

        params = list(model.parameters())
        checked, max_rel = compare_gradients(loss_fn, params, n_samples=50, seed=19)
        assert checked == 50
        assert max_rel < 1e-3


class TestCheckpoint:
    def test_save_load_bitwise_forward(self, tmp_path):
        model = build_model(SMALL, seed=20)
        path = tmp_path / "model.fsm"
        save_checkpoint(model, path)
        loaded, config = load_checkpoint(path)
        assert config == SMALL
        x, aux = rand((1, 1, 32, 32), 21), rand((1, 1, 32, 32), 22)
        assert torch.equal(model(x, aux).i_spa, loaded(x, aux).i_spa)

    def test_archive_contains_exactly_the_parameter_names(self, tmp_path):
        model = build_model(SMALL, seed=23)
        path = tmp_path / "model.fsm"
        save_checkpoint(model, path)
        with zipfile.ZipFile(path) as zf:
            stored = {n[len("params/") :] for n in zf.namelist() if n.startswith("params/")}
        assert stored == {name for name, _ in model.named_parameters()}

    def test_mismatched_config_names_offender(self, tmp_path):
        model = build_model(SMALL, seed=24)
        path = tmp_path / "model.fsm"
        save_checkpoint(model, path)
        with zipfile.ZipFile(path) as zf:
            entries = {n: zf.read(n) for n in zf.namelist()}
        bad_config = json.loads(entries["config.json"])
        bad_config["base_channels"] = 8
        entries["config.json"] = json.dumps(bad_config).encode()
        bad_path = tmp_path / "bad.fsm"
        with zipfile.ZipFile(bad_path, "w") as zf:
            for name, blob in entries.items():
                zf.writestr(name, blob)
        with pytest.raises(CheckpointError, match="stem_target.weight"):
            load_checkpoint(bad_path)

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(CheckpointError, match="not found"):
            load_checkpoint(tmp_path / "nope.fsm")
