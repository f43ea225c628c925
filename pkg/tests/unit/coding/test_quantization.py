import unittest

import torch

from src.coding.quantization import quantize, round_half_away, ste_round
from src.models.errors import ConfigError


class TestQuantization(unittest.TestCase):
    """Test cases for rounding, noise and straight-through quantization."""

    def test_rounding_examples(self):
        """1.4 -> 1, -1.4 -> -1, ties go away from zero."""
        values = torch.tensor([1.4, -1.4, 1.5, -1.5, 2.5, -0.5, 0.0])
        self.assertEqual(quantize(values).tolist(), [1.0, -1.0, 2.0, -2.0, 3.0, -1.0, 0.0])

    def test_rounding_error_bound(self):
        """Rounded values are within 0.5 of the input."""
        v = torch.randn(10000) * 30
        self.assertLessEqual(float((round_half_away(v) - v).abs().max()), 0.5)

    def test_noise_mode(self):
        """Noise stays in [-0.5, 0.5) and is reproducible with a generator."""
        v = torch.zeros(10000)
        first = quantize(v, "noise", torch.Generator().manual_seed(3))
        second = quantize(v, "noise", torch.Generator().manual_seed(3))
        self.assertTrue(torch.equal(first, second))
        self.assertGreaterEqual(float(first.min()), -0.5)
        self.assertLess(float(first.max()), 0.5)

    def test_unknown_mode(self):
        """Unknown modes raise ConfigError."""
        with self.assertRaises(ConfigError):
            quantize(torch.zeros(1), "dither")

    def test_straight_through_gradient(self):
        """ste_round rounds forward and passes the gradient through unchanged."""
        v = torch.tensor([0.3, 1.7, -2.5], requires_grad=True)
        out = ste_round(v)
        self.assertEqual(out.tolist(), [0.0, 2.0, -3.0])
        (out * torch.tensor([1.0, 2.0, 3.0])).sum().backward()
        self.assertEqual(v.grad.tolist(), [1.0, 2.0, 3.0])
