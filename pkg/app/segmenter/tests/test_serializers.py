"""
Tests for configuration and manifest serializers.
"""
import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase, override_settings

from core.exceptions import ConfigError
from segmenter.serializers import TrainConfig, load_config, parse_config


class ConfigTests(SimpleTestCase):
    """Test run configuration"""

    def test_defaults(self):
        """Test the default hyperparameters"""
        config = load_config()
        self.assertEqual(config.embedding_size, 100)
        self.assertEqual(config.hidden_size, 100)
        self.assertEqual(config.learning_rate, 0.01)
        self.assertEqual(config.adv_weight, 0.05)
        self.assertEqual(config.dropout_keep, 0.8)
        self.assertEqual(config.init_range, 0.05)
        self.assertFalse(config.mask_illegal_transitions)

    def test_overrides(self):
        """Test given keys override the defaults"""
        config = parse_config({'hidden_size': 8, 'batch_size': {'MSR': 16}})
        self.assertEqual(config.hidden_size, 8)
        self.assertEqual(config.embedding_size, 100)
        self.assertEqual(config.batch_size_for('msr'), 16)
        self.assertEqual(config.batch_size_for('pku'),
                         config.default_batch_size)

    def test_unknown_key(self):
        """Test misspelled keys are errors"""
        with self.assertRaises(ConfigError) as ctx:
            parse_config({'hiden_size': 8})
        self.assertIn('hiden_size', str(ctx.exception))

    def test_invalid_values(self):
        """Test out-of-range values are errors"""
        for data in ({'hidden_size': 0}, {'dropout_keep': 1.5},
                     {'learning_rate': -0.1}, {'adam_beta1': 1.0},
                     {'hidden_size': 'big'}):
            with self.subTest(data=data):
                with self.assertRaises(ConfigError):
                    parse_config(data)

    def test_not_an_object(self):
        """Test a JSON list is not a configuration"""
        with self.assertRaises(ConfigError):
            parse_config([1, 2])

    def test_load_file(self):
        """Test reading a JSON configuration file"""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'config.json'
            path.write_text(json.dumps({'seed': 7}), encoding='utf-8')
            self.assertEqual(load_config(path).seed, 7)
            path.write_text('{seed: 7', encoding='utf-8')
            with self.assertRaises(ConfigError):
                load_config(path)

    @override_settings(CWS_TRAINING_DEFAULTS={'hidden_size': 12})
    def test_defaults_from_settings(self):
        """Test defaults are read from the settings"""
        self.assertEqual(TrainConfig.defaults().hidden_size, 12)

    def test_replace(self):
        """Test replace returns a changed copy"""
        config = TrainConfig()
        changed = config.replace(seed=9)
        self.assertEqual((config.seed, changed.seed), (1, 9))
