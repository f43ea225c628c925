import os
import tempfile
import unittest

from src.models.config import ModelConfig
from src.models.errors import ConfigError, InputError
from src.utils.config_file import coerce_value, format_config, parse_assignments, resolve_configs


class TestConfigFile(unittest.TestCase):
    """Test cases for key=value configuration."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "run.cfg")
        with open(self.path, "w") as f:
            f.write("# toy run\nlmbda = 0.0035\nmax_steps=20  # short\n\nsch_stack=1,2,1\n")

    def tearDown(self):
        self.tmp.cleanup()

    def test_coerce_types(self):
        """Values take the type of their field."""
        self.assertEqual(coerce_value("sch_stack", "2, 3, 2"), (2, 3, 2))
        self.assertIs(coerce_value("use_wavelet", "no"), False)
        self.assertIsNone(coerce_value("channel_logit_scale", "none"))
        self.assertEqual(coerce_value("channel_logit_scale", "2.5"), 2.5)
        self.assertEqual(coerce_value("batch_size", "4"), 4)

    def test_bad_values(self):
        """Unknown keys and unparsable values raise ConfigError."""
        with self.assertRaises(ConfigError):
            coerce_value("colour", "1")
        with self.assertRaises(ConfigError):
            coerce_value("batch_size", "four")
        with self.assertRaises(ConfigError):
            parse_assignments(["batch_size 4"])

    def test_file_parsing(self):
        """Comments and blank lines are ignored."""
        with open(self.path) as f:
            values = parse_assignments(f)
        self.assertEqual(values, {"lmbda": 0.0035, "max_steps": 20, "sch_stack": (1, 2, 1)})

    def test_precedence(self):
        """Flags beat overrides, which beat the file, which beats the defaults."""
        model, train = resolve_configs(
            self.path, overrides=["max_steps=30", "lmbda=0.0067"], flags={"max_steps": 40, "seed": None}
        )
        self.assertEqual(model.lmbda, 0.0067)
        self.assertEqual(model.sch_stack, (1, 2, 1))
        self.assertEqual(train.max_steps, 40)
        self.assertEqual(train.seed, 0)

    def test_base_preset(self):
        """Unset keys come from the base preset."""
        model, _ = resolve_configs(base=ModelConfig.tiny())
        self.assertEqual(model, ModelConfig.tiny())

    def test_invalid_result(self):
        """The merged config is validated."""
        with self.assertRaises(ConfigError):
            resolve_configs(overrides=["lmbda=0.5"])

    def test_missing_file(self):
        """A missing config file raises InputError."""
        with self.assertRaises(InputError):
            resolve_configs(os.path.join(self.tmp.name, "none.cfg"))

    def test_resolved_config_logged(self):
        """Every key of the resolved config is logged."""
        with self.assertLogs("src.utils.config_file", level="INFO") as logs:
            model, train = resolve_configs(base=ModelConfig.tiny())
        text = "\n".join(logs.output)
        self.assertIn("sch_stack=1,1,1", text)
        self.assertIn("max_steps=", format_config(model, train))
