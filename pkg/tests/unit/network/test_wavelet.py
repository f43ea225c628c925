import unittest

import torch

from src.models.errors import DimensionError
from src.network.wavelet import HaarDWT, HaarIDWT, WaveletCoeffs, dwt2, idwt2


class TestHaarWavelet(unittest.TestCase):
    """Test cases for the single-level Haar transform."""

    def setUp(self):
        """Set up a seeded random batch."""
        torch.manual_seed(0)
        self.x = torch.rand(2, 3, 16, 24)

    def test_two_by_two_example(self):
        """[[1, 2], [3, 4]] gives LL, HL, LH, HH = 5, 1, 2, 0."""
        coeffs = dwt2(torch.tensor([[[1.0, 2.0], [3.0, 4.0]]]))
        self.assertEqual(coeffs.data.flatten().tolist(), [5.0, 1.0, 2.0, 0.0])
        self.assertEqual(coeffs.source_shape, (1, 2, 2))

    def test_inverse_of_two_by_two_example(self):
        """Coefficients (5, 1, 2, 0) on a 1x1 grid invert to [[1, 2], [3, 4]]."""
        image = idwt2(torch.tensor([5.0, 1.0, 2.0, 0.0]).reshape(4, 1, 1))
        self.assertTrue(torch.allclose(image, torch.tensor([[[1.0, 2.0], [3.0, 4.0]]])))

    def test_constant_image(self):
        """A constant image has LL = 2v and zero detail bands."""
        coeffs = dwt2(torch.full((1, 8, 8), 3.0))
        ll, hl, lh, hh = coeffs.subbands
        self.assertTrue(torch.allclose(ll, torch.full_like(ll, 6.0)))
        for band in (hl, lh, hh):
            self.assertEqual(float(band.abs().max()), 0.0)

    def test_output_shape_and_channel_grouping(self):
        """(3, 256, 256) becomes (12, 128, 128) with LL planes of all channels first."""
        x = torch.rand(3, 256, 256)
        coeffs = dwt2(x)
        self.assertEqual(tuple(coeffs.data.shape), (12, 128, 128))
        pooled = torch.nn.functional.avg_pool2d(x.unsqueeze(0), 2).squeeze(0)
        self.assertTrue(torch.allclose(coeffs.data[:3], 2 * pooled, atol=1e-6))

    def test_perfect_reconstruction(self):
        """idwt2(dwt2(x)) equals x within single-precision tolerance."""
        for seed in range(20):
            torch.manual_seed(seed)
            x = torch.rand(3, 32, 48)
            self.assertLessEqual(float((idwt2(dwt2(x)) - x).abs().max()), 1e-6)

    def test_perfect_reconstruction_double(self):
        """Reconstruction in double precision is exact to 1e-12."""
        x = self.x.double()
        self.assertLessEqual(float((idwt2(dwt2(x)) - x).abs().max()), 1e-12)

    def test_energy_preservation(self):
        """The orthonormal scale keeps the L2 norm."""
        energy_in = float(self.x.norm())
        energy_out = float(dwt2(self.x).data.norm())
        self.assertAlmostEqual(energy_out / energy_in, 1.0, delta=1e-5)

    def test_linearity(self):
        """dwt2(a x + b y) = a dwt2(x) + b dwt2(y)."""
        y = torch.rand_like(self.x)
        left = dwt2(2.0 * self.x - 0.5 * y).data
        right = 2.0 * dwt2(self.x).data - 0.5 * dwt2(y).data
        self.assertTrue(torch.allclose(left, right, atol=1e-6))

    def test_unnormalized_scale_round_trip(self):
        """The raw +-1 filters (scale 1) still invert exactly."""
        coeffs = dwt2(self.x, scale=1.0)
        self.assertTrue(torch.allclose(idwt2(coeffs, scale=1.0), self.x, atol=1e-6))

    def test_odd_dimensions_rejected(self):
        """Odd spatial sizes raise DimensionError."""
        with self.assertRaises(DimensionError):
            dwt2(torch.rand(3, 7, 8))

    def test_inverse_rejects_bad_channel_count(self):
        """idwt2 needs a multiple of four channels."""
        with self.assertRaises(DimensionError):
            idwt2(WaveletCoeffs(data=torch.rand(6, 4, 4), source_shape=(1, 8, 8)))

    def test_modules_match_functions(self):
        """HaarDWT/HaarIDWT wrap the functional transforms for batched input."""
        coeffs = HaarDWT()(self.x)
        self.assertEqual(tuple(coeffs.shape), (2, 12, 8, 12))
        self.assertTrue(torch.allclose(HaarIDWT()(coeffs), self.x, atol=1e-6))
