import unittest

from src.models.config import (
    LAMBDA_SET,
    ModelConfig,
    TrainConfig,
    config_keys,
    model_config_from_dict,
    train_config_from_dict,
)
from src.models.errors import ConfigError


class TestModelConfig(unittest.TestCase):
    """Test cases for the model configuration."""

    def test_defaults_validate(self):
        """The default, toy and tiny configs are valid."""
        for config in (ModelConfig(), ModelConfig.toy(), ModelConfig.tiny()):
            self.assertIs(config.validate(), config)

    def test_toy_values(self):
        """The toy config uses N=32, M=48 and one block per stack."""
        toy = ModelConfig.toy()
        self.assertEqual((toy.N, toy.M, toy.z_channels, toy.sch_stack), (32, 48, 24, (1, 1, 1)))
        self.assertEqual(toy.slice_channels, 12)

    def test_lambda_index(self):
        """Lambdas map to their position in the lambda set."""
        self.assertEqual(ModelConfig(lmbda=0.0025).lambda_index, 0)
        self.assertEqual(ModelConfig(lmbda=0.05).lambda_index, len(LAMBDA_SET) - 1)
        with self.assertRaises(ConfigError):
            ModelConfig(lmbda=0.02).validate()

    def test_invalid_values(self):
        """Invariant violations raise ConfigError."""
        invalid = [
            {"M": 322, "slice_count": 5},
            {"N": 7},
            {"window_size": 1},
            {"sch_stack": (1, 1)},
            {"heads": 3},
            {"channel_head_layout": "rows"},
            {"wavelet_scale": 0.0},
            {"symbol_bound": 0},
        ]
        for overrides in invalid:
            with self.assertRaises(ConfigError, msg=str(overrides)):
                ModelConfig(**overrides).validate()

    def test_hash_tracks_architecture_only(self):
        """The hash changes with architecture fields but not with lambda."""
        base = ModelConfig.toy()
        self.assertEqual(base.config_hash(), ModelConfig.toy().config_hash())
        self.assertEqual(base.config_hash(), ModelConfig(**{**base.__dict__, "lmbda": 0.05}).config_hash())
        self.assertNotEqual(base.config_hash(), ModelConfig(**{**base.__dict__, "M": 64}).config_hash())
        self.assertLess(base.config_hash(), 2**32)

    def test_from_dict(self):
        """Dictionaries round trip, lists become tuples and unknown keys are rejected."""
        config = model_config_from_dict({**ModelConfig.tiny().__dict__, "sch_stack": [1, 1, 1]})
        self.assertEqual(config, ModelConfig.tiny())
        with self.assertRaises(ConfigError):
            model_config_from_dict({"depth": 3})


class TestTrainConfig(unittest.TestCase):
    """Test cases for the training configuration."""

    def test_defaults(self):
        """Defaults follow the training recipe."""
        config = TrainConfig().validate()
        self.assertEqual((config.batch_size, config.learning_rate, config.crop_size), (8, 1e-4, 256))
        self.assertEqual((config.plateau_patience, config.plateau_factor), (5, 0.3))

    def test_crop_multiple(self):
        """Crop sizes must be multiples of 64."""
        with self.assertRaises(ConfigError):
            TrainConfig(crop_size=100).validate()

    def test_from_dict(self):
        """train_config_from_dict validates its result."""
        self.assertEqual(train_config_from_dict({"max_steps": 10}).max_steps, 10)
        with self.assertRaises(ConfigError):
            train_config_from_dict({"batch_size": 0})

    def test_config_keys(self):
        """Keys are owned by exactly one dataclass."""
        keys = config_keys()
        self.assertIs(keys["M"], ModelConfig)
        self.assertIs(keys["crop_size"], TrainConfig)
