from django.apps import AppConfig


class CoreConfig(AppConfig):
    """Tensor engine, gradient checks and training run records."""
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'core'
    verbose_name = 'Segmenter core'
