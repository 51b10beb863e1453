import numpy as np
import pytest
import torch

from fsmnet.kspace import fft2c
from fsmnet.losses import frequency_loss, pixel_loss, total_loss
from fsmnet.model import ReconOutput

from dft_oracle import dft2c_oracle
from gradcheck import compare_gradients


def rand(shape, seed):
    gen = torch.Generator().manual_seed(seed)
    return torch.rand(shape, generator=gen, dtype=torch.float64)


class TestPixelLoss:
    def test_perfect_reconstruction(self):
        x = rand((1, 1, 8, 8), 0)
        assert pixel_loss(x, x, x).item() == 0.0

    def test_constant_offset(self):
        x = rand((1, 1, 8, 8), 1)
        assert pixel_loss(x + 1.0, x, x).item() == pytest.approx(1.0)

    def test_matches_elementwise_recomputation(self):
        i_spa, i_fre, full = rand((2, 1, 8, 8), 2), rand((2, 1, 8, 8), 3), rand((2, 1, 8, 8), 4)
        expected = np.abs((i_spa - full).numpy()).mean() + np.abs((i_fre - full).numpy()).mean()
        assert pixel_loss(i_spa, i_fre, full).item() == pytest.approx(expected, rel=1e-12)

    def test_symmetry(self):
        a, b = rand((1, 1, 8, 8), 5), rand((1, 1, 8, 8), 6)
        assert pixel_loss(a, a, b).item() == pytest.approx(pixel_loss(b, b, a).item())

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            pixel_loss(rand((1, 1, 8, 8), 0), rand((1, 1, 8, 8), 0), rand((1, 1, 4, 4), 0))


class TestFrequencyLoss:
    def test_perfect_reconstruction(self):
        x = rand((1, 1, 8, 8), 0)
        assert frequency_loss(x, x).item() == 0.0

    def test_doubled_image_amplitude_term(self):
        x = rand((1, 1, 8, 8), 1) + 0.5
        amp = torch.abs(fft2c(x))
        assert frequency_loss(2.0 * x, x).item() == pytest.approx(amp.mean().item(), rel=1e-9)

    def test_matches_bruteforce_dft_recomputation(self):
        pred, full = rand((1, 1, 8, 8), 2), rand((1, 1, 8, 8), 3)
        sp = dft2c_oracle(pred[0, 0].numpy())
        sf = dft2c_oracle(full[0, 0].numpy())
        expected = np.abs(np.abs(sp) - np.abs(sf)).mean() + np.abs(
            np.angle(sp) - np.angle(sf)
        ).mean()
        assert frequency_loss(pred, full).item() == pytest.approx(expected, rel=1e-9)

    def test_symmetry(self):
        a, b = rand((1, 1, 8, 8), 4), rand((1, 1, 8, 8), 5)
        assert frequency_loss(a, b).item() == pytest.approx(frequency_loss(b, a).item())

    def test_nonnegative(self):
        for seed in range(4):
            val = frequency_loss(rand((1, 1, 8, 8), seed), rand((1, 1, 8, 8), seed + 50)).item()
            assert val > 0.0


class TestTotalLoss:
    def test_perfect_reconstruction(self):
        x = rand((1, 1, 8, 8), 0)
        breakdown = total_loss(ReconOutput(i_spa=x, i_fre=x), x)
        assert breakdown.pixel.item() == 0.0
        assert breakdown.frequency.item() == 0.0
        assert breakdown.total.item() == 0.0

    def test_lambda_zero_override(self):
        recon = ReconOutput(i_spa=rand((1, 1, 8, 8), 1), i_fre=rand((1, 1, 8, 8), 2))
        breakdown = total_loss(recon, rand((1, 1, 8, 8), 3), lam=0.0)
        assert breakdown.total.item() == breakdown.pixel.item()

    def test_exact_composition(self):
        recon = ReconOutput(i_spa=rand((1, 1, 8, 8), 4), i_fre=rand((1, 1, 8, 8), 5))
        breakdown = total_loss(recon, rand((1, 1, 8, 8), 6))
        assert breakdown.lam == 0.01
        assert breakdown.total.item() == (breakdown.pixel + 0.01 * breakdown.frequency).item()

    def test_gradients_match_finite_differences(self):
        i_spa = rand((1, 1, 8, 8), 7).requires_grad_(True)
        i_fre = rand((1, 1, 8, 8), 8).requires_grad_(True)
        full = rand((1, 1, 8, 8), 9)

        def loss_fn():
            return total_loss(ReconOutput(i_spa=i_spa, i_fre=i_fre), full).total

        checked, max_rel = compare_gradients(loss_fn, [i_spa, i_fre], n_samples=64, seed=10)
        assert checked == 64
        assert max_rel < 1e-3
