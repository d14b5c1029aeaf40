"""Model geometry, dilation block semantics, init, and checkpoints."""

from __future__ import annotations

import json
import zipfile

import numpy as np
import pytest
import torch

from conftest import MICRO_LATENT, MICRO_LEN, build_micro
from oracles import gated_residual_block
from soundmorph.models import (
    CheckpointError,
    ClassifierSpec,
    DilationBlock,
    DilationBlockSpec,
    VaeModel,
    build_ccvae,
    build_dcvae,
    decode,
    digit_classifier_spec,
    drum_classifier_spec,
    encode,
    load_checkpoint,
    receptive_field,
    reparameterize,
    save_checkpoint,
    seeded_init,
)


class TestReceptiveField:
    def test_full_block_values(self):
        assert receptive_field(50, 10) == 5119
        assert receptive_field(50, 5) == 319

    def test_probe_scale_value(self):
        assert receptive_field(10, 5) == 63

    def test_single_layer(self):
        assert receptive_field(1, 1) == 1

    def test_non_divisible_rejected(self):
        with pytest.raises(ValueError, match="divide"):
            receptive_field(50, 7)

    @pytest.mark.parametrize("args", [(0, 5), (50, 0), (-10, 5)])
    def test_non_positive_rejected(self, args):
        with pytest.raises(ValueError, match="positive"):
            receptive_field(*args)


class TestDilationBlockSpec:
    def test_dilation_cycle_full_geometry(self):
        spec = DilationBlockSpec()
        assert spec.dilations(1) == [2 ** (i % 10) for i in range(50)]
        assert spec.dilations(2) == [2 ** (i % 5) for i in range(50)]
        assert max(spec.dilations(1)) == 512
        assert max(spec.dilations(2)) == 16

    def test_dilation_cycle_micro(self):
        spec = DilationBlockSpec(num_layers=4, channels=3, m1=2, m2=1)
        assert spec.dilations(1) == [1, 2, 1, 2]
        assert spec.dilations(2) == [1, 1, 1, 1]

    def test_non_positive_fields_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            DilationBlockSpec(num_layers=0)


class TestDilationBlock:
    def test_zero_weights_give_zero_output(self):
        spec = DilationBlockSpec(num_layers=2, channels=3, m1=2, m2=1)
        block = DilationBlock(spec)
        with torch.no_grad():
            for p in block.parameters():
                p.zero_()
        x = torch.randn(1, 3, 16, generator=torch.Generator().manual_seed(0))
        assert torch.equal(block(x), torch.zeros(1, 3, 16))

    def test_matches_numpy_reference(self):
        spec = DilationBlockSpec(num_layers=4, channels=3, m1=2, m2=2)
        block = DilationBlock(spec).double()
        seeded_init(block, seed=5)
        x = torch.randn(1, 3, 20, generator=torch.Generator().manual_seed(1)).double()

        def params(convs):
            return [
                (c.weight.detach().numpy(), c.bias.detach().numpy(), c.dilation[0])
                for c in convs
            ]

        want = gated_residual_block(x[0].numpy(), params(block.sub1), params(block.sub2))
        got = block(x)[0].detach().numpy()
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_channel_mismatch_rejected(self):
        block = DilationBlock(DilationBlockSpec(num_layers=2, channels=3, m1=1, m2=1))
        with pytest.raises(ValueError, match="channels"):
            block(torch.zeros(1, 4, 16))

    def test_length_preserved(self):
        block = DilationBlock(DilationBlockSpec(num_layers=4, channels=2, m1=2, m2=2))
        assert block(torch.randn(2, 2, 37)).shape == (2, 2, 37)


class TestLocalityProbe:
    """Perturbing one input sample reaches exactly the receptive field."""

    def test_influence_region_is_exact(self):
        spec = DilationBlockSpec(num_layers=10, channels=4, m1=5, m2=5)
        rf = receptive_field(10, 5)
        assert rf == 63
        block = DilationBlock(spec).double()
        seeded_init(block, seed=3)

        length, pos = 160, 40
        gen = torch.Generator().manual_seed(7)
        base = torch.randn(1, 4, length, generator=gen).double()
        bumped = base.clone()
        bumped[0, :, pos] += 0.5

        with torch.no_grad():
            diff = (block(bumped) - block(base)).abs().sum(dim=1)[0].numpy()

        # causality: nothing before the perturbed sample moves, at all
        assert np.all(diff[:pos] == 0.0)
        # locality: influence stops exactly rf samples later
        assert np.all(diff[pos + rf :] == 0.0)
        assert diff[pos] > 0.0
        assert diff[pos + rf - 1] > 0.0

    def test_future_input_cannot_affect_past_output(self):
        spec = DilationBlockSpec(num_layers=10, channels=4, m1=5, m2=5)
        block = DilationBlock(spec).double()
        seeded_init(block, seed=3)
        gen = torch.Generator().manual_seed(9)
        a = torch.randn(1, 4, 100, generator=gen).double()
        b = a.clone()
        b[0, :, 70:] = 0.0
        with torch.no_grad():
            out_a, out_b = block(a), block(b)
        assert torch.equal(out_a[:, :, :70], out_b[:, :, :70])


class TestClassifierSpecs:
    def test_digit_preset(self):
        spec = digit_classifier_spec()
        assert spec.hidden_layers == (10, 10, 10)
        assert spec.num_classes == 10

    def test_drum_preset_width_tracks_clusters(self):
        assert drum_classifier_spec(3).hidden_layers == (3,)
        assert drum_classifier_spec(3).num_classes == 3

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="classes"):
            ClassifierSpec(hidden_layers=(4,), num_classes=1)


class TestBuildDeterminism:
    @pytest.mark.parametrize("arch", ["DC", "CC"])
    def test_same_seed_is_bitwise_identical(self, arch):
        a, b = build_micro(arch, seed=11), build_micro(arch, seed=11)
        for (name, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert torch.equal(pa, pb), name

    @pytest.mark.parametrize("arch", ["DC", "CC"])
    def test_different_seeds_differ(self, arch):
        a, b = build_micro(arch, seed=0), build_micro(arch, seed=1)
        assert any(
            not torch.equal(pa, pb)
            for (_, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters())
        )

    def test_global_rng_state_is_irrelevant(self):
        torch.manual_seed(0)
        a = build_micro("CC", seed=4)
        torch.manual_seed(12345)
        b = build_micro("CC", seed=4)
        for (name, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert torch.equal(pa, pb), name

    def test_init_respects_fan_in_bound_and_zero_bias(self):
        model = build_micro("DC", seed=2)
        for name, mod in model.named_modules():
            if isinstance(mod, torch.nn.ConvTranspose1d):
                fan_in = mod.weight.shape[0] * mod.weight.shape[2]
            elif isinstance(mod, torch.nn.Conv1d):
                fan_in = mod.weight.shape[1] * mod.weight.shape[2]
            elif isinstance(mod, torch.nn.Linear):
                fan_in = mod.weight.shape[1]
            else:
                continue
            bound = np.sqrt(6.0 / fan_in)
            assert mod.weight.abs().max().item() <= bound, name
            assert torch.equal(mod.bias, torch.zeros_like(mod.bias)), name


class TestShapeContract:
    """The full-size geometry: 4096 samples compress to a 128-wide bottleneck."""

    @pytest.mark.parametrize("build", [build_dcvae, build_ccvae])
    def test_pre_dense_width_and_decode_length(self, build):
        model = build(input_len=4096, latent_dim=64, seed=0)
        assert model.encoder.fc_mu.in_features == 128
        out = decode(model, np.zeros((1, 64)))
        assert out.shape == (1, 4096)

    def test_micro_compression_is_32x(self, micro_model):
        assert micro_model.encoder.fc_mu.in_features == MICRO_LEN // 32

    @pytest.mark.parametrize("arch", ["DC", "CC"])
    def test_indivisible_input_len_rejected(self, arch):
        build = build_dcvae if arch == "DC" else build_ccvae
        with pytest.raises(ValueError, match="divisible"):
            build(input_len=100, latent_dim=4, seed=0)

    def test_cc_needs_exactly_five_conv_layers(self):
        with pytest.raises(ValueError, match="5"):
            build_ccvae(input_len=32, latent_dim=4, seed=0, conv_channels=(8, 8, 8))


class TestForward:
    def test_shapes(self, micro_model):
        x = torch.randn(3, 1, MICRO_LEN, generator=torch.Generator().manual_seed(0))
        eps = torch.zeros(3, MICRO_LATENT)
        recon, mu, log_var, z = micro_model(x, eps)
        assert recon.shape == (3, 1, MICRO_LEN)
        assert mu.shape == log_var.shape == z.shape == (3, MICRO_LATENT)

    def test_zero_eps_makes_z_equal_mu(self, micro_model):
        x = torch.randn(2, 1, MICRO_LEN, generator=torch.Generator().manual_seed(1))
        _, mu, _, z = micro_model(x, torch.zeros(2, MICRO_LATENT))
        assert torch.equal(z, mu)

    def test_output_is_within_tanh_range(self, micro_model):
        x = torch.randn(2, 1, MICRO_LEN, generator=torch.Generator().manual_seed(2))
        recon, *_ = micro_model(x, torch.zeros(2, MICRO_LATENT))
        assert recon.abs().max().item() <= 1.0

    def test_wrong_input_length_rejected(self, micro_model):
        with pytest.raises(ValueError, match="shape"):
            micro_model.encode(torch.zeros(1, 1, MICRO_LEN + 1))

    def test_wrong_latent_width_rejected(self, micro_model):
        with pytest.raises(ValueError, match="latent"):
            micro_model.decode(torch.zeros(1, MICRO_LATENT + 1))
        with pytest.raises(ValueError, match="latent"):
            micro_model.classify(torch.zeros(1, MICRO_LATENT + 1))

    def test_classifier_logit_shape(self, micro_model):
        logits = micro_model.classify(torch.zeros(4, MICRO_LATENT))
        assert logits.shape == (4, micro_model.num_classes)

    def test_batch_rows_are_independent(self, micro_model):
        gen = torch.Generator().manual_seed(3)
        x = torch.randn(3, 1, MICRO_LEN, generator=gen)
        mu_batch, _ = micro_model.encode(x)
        for i in range(3):
            mu_single, _ = micro_model.encode(x[i : i + 1])
            torch.testing.assert_close(mu_batch[i], mu_single[0], atol=1e-6, rtol=0)

    def test_perturbing_one_row_leaves_others_alone(self, micro_model):
        gen = torch.Generator().manual_seed(4)
        x = torch.randn(3, 1, MICRO_LEN, generator=gen)
        y = x.clone()
        y[1] += 0.25
        mu_x, _ = micro_model.encode(x)
        mu_y, _ = micro_model.encode(y)
        torch.testing.assert_close(mu_x[0], mu_y[0], atol=1e-6, rtol=0)
        torch.testing.assert_close(mu_x[2], mu_y[2], atol=1e-6, rtol=0)
        assert not torch.allclose(mu_x[1], mu_y[1])


class TestReparameterize:
    def test_hand_example(self):
        mu = torch.tensor([1.0, -2.0])
        log_var = torch.tensor([0.0, 2 * np.log(3.0)])
        eps = torch.tensor([0.5, 1.0])
        z = reparameterize(mu, log_var, eps)
        torch.testing.assert_close(z, torch.tensor([1.5, 1.0], dtype=z.dtype))

    def test_zero_eps_returns_mu(self):
        mu = torch.randn(4, 3, generator=torch.Generator().manual_seed(0))
        assert torch.equal(reparameterize(mu, torch.zeros(4, 3), torch.zeros(4, 3)), mu)

    def test_sample_moments_match_distribution(self):
        mu = torch.tensor([0.7])
        log_var = torch.tensor([np.log(2.5)])
        gen = torch.Generator().manual_seed(42)
        eps = torch.randn(100_000, 1, generator=gen)
        z = reparameterize(mu.expand_as(eps), log_var.expand_as(eps), eps)
        assert z.mean().item() == pytest.approx(0.7, abs=0.02)
        assert z.var(unbiased=False).item() == pytest.approx(2.5, rel=0.03)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shapes"):
            reparameterize(torch.zeros(2), torch.zeros(3), torch.zeros(2))


class TestNumpyBoundary:
    def test_encode_accepts_clips_and_arrays(self, micro_model, tmp_path):
        from conftest import micro_clip

        clips = [micro_clip(seed=i) for i in range(3)]
        mu_a, lv_a = encode(micro_model, clips)
        mu_b, lv_b = encode(micro_model, [c.samples for c in clips])
        np.testing.assert_array_equal(mu_a, mu_b)
        assert mu_a.shape == lv_a.shape == (3, MICRO_LATENT)
        assert mu_a.dtype == np.float64

    def test_encode_rejects_wrong_length(self, micro_model):
        with pytest.raises(ValueError, match="samples"):
            encode(micro_model, [np.zeros(MICRO_LEN + 4, dtype=np.float32)])

    def test_decode_single_vector_is_promoted(self, micro_model):
        out = decode(micro_model, np.zeros(MICRO_LATENT))
        assert out.shape == (1, MICRO_LEN)

    def test_decode_is_continuous_in_z(self, micro_model):
        z = np.full((1, MICRO_LATENT), 0.3)
        base = decode(micro_model, z)
        nudged = decode(micro_model, z + 1e-6)
        assert np.max(np.abs(nudged - base)) < 1e-4
        assert not np.array_equal(nudged, base)


class TestConvStackParamCount:
    def test_cc_encoder_matches_closed_form(self):
        channels = (4, 4, 8, 8, 8)
        model = build_ccvae(32, 4, seed=0, num_classes=2, conv_channels=channels)
        kernels = [5, 4, 4, 4, 4]
        widths = [1, *channels]
        want = sum(
            cin * cout * k + cout
            for cin, cout, k in zip(widths[:-1], widths[1:], kernels)
        )
        got = sum(p.numel() for p in model.encoder.convs.parameters())
        assert got == want

    def test_dc_block_matches_closed_form(self):
        model = build_micro("DC", seed=0)
        spec = model.encoder.block.spec
        per_conv = spec.channels * spec.channels * spec.kernel + spec.channels
        want = 2 * spec.num_layers * per_conv
        got = sum(p.numel() for p in model.encoder.block.parameters())
        assert got == want


class TestCheckpoint:
    @pytest.mark.parametrize("arch", ["DC", "CC"])
    def test_round_trip_is_bitwise(self, arch, tmp_path):
        model = build_micro(arch, seed=6)
        path = tmp_path / "model.npz"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        assert loaded.arch == arch
        assert (loaded.input_len, loaded.latent_dim) == (MICRO_LEN, MICRO_LATENT)
        assert loaded.build_kwargs == model.build_kwargs
        for name, tensor in model.state_dict().items():
            assert torch.equal(loaded.state_dict()[name], tensor), name

    def test_float64_round_trip_restores_dtype(self, tmp_path):
        model = build_micro("CC", seed=0).double()
        path = tmp_path / "model.npz"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        assert next(loaded.parameters()).dtype == torch.float64

    def test_expect_arch_mismatch_rejected(self, tmp_path):
        path = tmp_path / "model.npz"
        save_checkpoint(build_micro("CC", seed=0), path)
        with pytest.raises(CheckpointError, match="CC"):
            load_checkpoint(path, expect_arch="DC")

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(CheckpointError, match="no such"):
            load_checkpoint(tmp_path / "absent.npz")

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "model.npz"
        save_checkpoint(build_micro("CC", seed=0), path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_garbage_file_rejected(self, tmp_path):
        path = tmp_path / "model.npz"
        path.write_bytes(b"not a checkpoint at all")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def _tampered(self, tmp_path, mutate):
        """Save a micro checkpoint, apply mutate(dict) to its arrays, resave."""
        path = tmp_path / "model.npz"
        save_checkpoint(build_micro("CC", seed=0), path)
        arrays = dict(np.load(path).items())
        mutate(arrays)
        np.savez(path, **arrays)
        return path

    def test_extra_tensor_rejected(self, tmp_path):
        path = self._tampered(
            tmp_path, lambda a: a.__setitem__("param/bogus.weight", np.zeros(3))
        )
        with pytest.raises(CheckpointError, match="unexpected"):
            load_checkpoint(path)

    def test_missing_tensor_rejected(self, tmp_path):
        def drop_one(arrays):
            name = next(k for k in arrays if k.startswith("param/"))
            del arrays[name]

        with pytest.raises(CheckpointError, match="missing"):
            load_checkpoint(self._tampered(tmp_path, drop_one))

    def test_wrong_shape_rejected(self, tmp_path):
        def reshape_one(arrays):
            name = next(k for k in arrays if k.endswith("fc_mu.weight"))
            arrays[name] = np.zeros((1, 1))

        with pytest.raises(CheckpointError, match="shape"):
            load_checkpoint(self._tampered(tmp_path, reshape_one))

    def test_unknown_version_rejected(self, tmp_path):
        def bump_version(arrays):
            meta = json.loads(arrays["meta"].tobytes().decode())
            meta["version"] = 999
            arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)

        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(self._tampered(tmp_path, bump_version))
