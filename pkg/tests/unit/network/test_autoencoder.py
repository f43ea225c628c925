import unittest

import torch

from src.models.config import ModelConfig
from src.models.errors import DimensionError
from src.network.autoencoder import AnalysisTransform, SynthesisTransform


class TestTransforms(unittest.TestCase):
    """Test cases for the analysis and synthesis transforms."""

    def setUp(self):
        """Build tiny transforms."""
        torch.manual_seed(0)
        self.config = ModelConfig.tiny()
        self.g_a = AnalysisTransform(self.config).eval()
        self.g_s = SynthesisTransform(self.config).eval()

    def test_analysis_shape(self):
        """The analysis transform reduces by 16 and outputs M channels."""
        y = self.g_a(torch.rand(1, 3, 128, 192))
        self.assertEqual(tuple(y.shape), (1, self.config.M, 8, 12))

    def test_synthesis_shape_round_trip(self):
        """synthesis(analysis(x)) has the shape of x."""
        x = torch.rand(2, 3, 64, 128)
        self.assertEqual(self.g_s(self.g_a(x)).shape, x.shape)

    def test_analysis_is_deterministic(self):
        """Two calls give bit-identical latents."""
        x = torch.rand(1, 3, 64, 64)
        with torch.no_grad():
            self.assertTrue(torch.equal(self.g_a(x), self.g_a(x)))

    def test_zero_latent_is_finite(self):
        """A zero latent decodes to finite values."""
        with torch.no_grad():
            out = self.g_s(torch.zeros(1, self.config.M, 4, 4))
        self.assertTrue(torch.isfinite(out).all())

    def test_input_multiple_enforced(self):
        """Inputs that are not multiples of 64 raise DimensionError."""
        with self.assertRaises(DimensionError):
            self.g_a(torch.rand(1, 3, 96, 64))

    def test_stem_widths(self):
        """The wavelet stem maps 12 sub-band channels to N."""
        self.assertEqual(self.g_a.stem.conv1.in_channels, 12)
        self.assertEqual(self.g_a.stem.conv1.out_channels, self.config.N)
        self.assertEqual(self.g_s.head.conv2.out_channels, 12)

    def test_stack_depths(self):
        """Each stage holds the configured number of SCH blocks."""
        config = ModelConfig(N=8, M=8, z_channels=4, sch_stack=(2, 1, 0), window_size=2, heads=2, slice_count=2)
        g_a = AnalysisTransform(config)
        self.assertEqual([len(stage.blocks) for stage in g_a.stages], [2, 1, 0])
        g_s = SynthesisTransform(config)
        self.assertEqual([len(stage.blocks) for stage in g_s.stages], [0, 1, 2])

    def test_without_wavelet(self):
        """The wavelet ablation keeps the x16 factor with strided and sub-pixel blocks."""
        config = ModelConfig(**{**ModelConfig.tiny().__dict__, "use_wavelet": False})
        x = torch.rand(1, 3, 64, 64)
        y = AnalysisTransform(config)(x)
        self.assertEqual(tuple(y.shape), (1, config.M, 4, 4))
        self.assertEqual(SynthesisTransform(config)(y).shape, x.shape)
