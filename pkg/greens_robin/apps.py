from django.apps import AppConfig


class GreensRobinConfig(AppConfig):
    name = 'greens_robin'
    verbose_name = 'Green and Robin functions'
    version = '1.0.0'
