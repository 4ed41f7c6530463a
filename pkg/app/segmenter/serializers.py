"""
Serializers for run configuration and run manifests.
"""
import json
from dataclasses import asdict, dataclass, field
from typing import Dict

from django.conf import settings
from rest_framework import serializers

from core.exceptions import ConfigError
from core.models import TrainingRun


@dataclass(frozen=True)
class TrainConfig:
    """Every hyperparameter of a training run."""
    embedding_size: int = 100
    hidden_size: int = 100
    learning_rate: float = 0.01
    adv_weight: float = 0.05
    dropout_keep: float = 0.8
    init_range: float = 0.05
    default_batch_size: int = 128
    batch_size: Dict[str, int] = field(default_factory=dict)
    adversarial_epochs: int = 2400
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    early_stop_patience: int = 10
    eval_every: int = 20
    phase2_max_epochs: int = 2000
    seed: int = 1
    min_freq: int = 1
    use_bigram: bool = True
    mask_illegal_transitions: bool = False

    def batch_size_for(self, corpus_name: str) -> int:
        return self.batch_size.get(corpus_name.lower(),
                                   self.default_batch_size)

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> 'TrainConfig':
        return TrainConfig(**{**self.to_dict(), **changes})

    @classmethod
    def defaults(cls) -> 'TrainConfig':
        return cls(**settings.CWS_TRAINING_DEFAULTS)


class TrainConfigSerializer(serializers.Serializer):
    """Validate a flat configuration object; unknown keys are errors."""
    embedding_size = serializers.IntegerField(min_value=1, required=False)
    hidden_size = serializers.IntegerField(min_value=1, required=False)
    learning_rate = serializers.FloatField(required=False)
    adv_weight = serializers.FloatField(min_value=0.0, required=False)
    dropout_keep = serializers.FloatField(required=False)
    init_range = serializers.FloatField(required=False)
    default_batch_size = serializers.IntegerField(min_value=1,
                                                  required=False)
    batch_size = serializers.DictField(
        child=serializers.IntegerField(min_value=1), required=False)
    adversarial_epochs = serializers.IntegerField(min_value=0,
                                                  required=False)
    adam_beta1 = serializers.FloatField(min_value=0.0, required=False)
    adam_beta2 = serializers.FloatField(min_value=0.0, required=False)
    adam_epsilon = serializers.FloatField(required=False)
    early_stop_patience = serializers.IntegerField(min_value=1,
                                                   required=False)
    eval_every = serializers.IntegerField(min_value=1, required=False)
    phase2_max_epochs = serializers.IntegerField(min_value=0, required=False)
    seed = serializers.IntegerField(min_value=0, required=False)
    min_freq = serializers.IntegerField(min_value=1, required=False)
    use_bigram = serializers.BooleanField(required=False)
    mask_illegal_transitions = serializers.BooleanField(required=False)

    def _positive(self, value):
        if value <= 0:
            raise serializers.ValidationError('Must be positive.')
        return value

    validate_learning_rate = _positive
    validate_init_range = _positive
    validate_adam_epsilon = _positive

    def validate_dropout_keep(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError('Must be in (0, 1].')
        return value

    def validate_batch_size(self, value):
        return {name.lower(): size for name, size in value.items()}

    def validate(self, attrs):
        """Reject keys that are not configuration fields."""
        unknown = sorted(set(self.initial_data) - set(self.fields))
        if unknown:
            raise serializers.ValidationError(
                {key: 'Unknown configuration key.' for key in unknown})
        for beta in ('adam_beta1', 'adam_beta2'):
            if beta in attrs and attrs[beta] >= 1:
                raise serializers.ValidationError({beta: 'Must be below 1.'})
        return attrs

    def create(self, validated_data):
        """Return the defaults overridden by the validated values."""
        return TrainConfig.defaults().replace(**validated_data)


def _flatten_errors(errors, prefix=''):
    for key, value in errors.items():
        if isinstance(value, dict):
            yield from _flatten_errors(value, f'{prefix}{key}.')
        else:
            yield f'{prefix}{key}: {" ".join(str(v) for v in value)}'


def parse_config(data) -> TrainConfig:
    if not isinstance(data, dict):
        raise ConfigError('configuration must be a JSON object')
    serializer = TrainConfigSerializer(data=data)
    if not serializer.is_valid():
        raise ConfigError('; '.join(_flatten_errors(serializer.errors)))
    return serializer.save()


def load_config(path=None) -> TrainConfig:
    """Defaults, overridden by the JSON object in ``path`` when given."""
    if path is None:
        return TrainConfig.defaults()
    try:
        with open(path, encoding='utf-8') as handle:
            data = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f'{path}: invalid JSON ({exc})') from None
    return parse_config(data)


class RunManifestSerializer(serializers.ModelSerializer):
    """Serializer for the manifest of a training run."""

    class Meta:
        model = TrainingRun
        fields = ['id', 'output_dir', 'arch', 'adversarial', 'seed',
                  'config', 'corpora', 'metrics', 'code_version',
                  'started_at', 'finished_at']
        read_only_fields = ['id']
