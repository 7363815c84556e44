from django.apps import AppConfig


class CriticalPointsConfig(AppConfig):
    name = 'critical_points'
    verbose_name = 'Robin critical points'
    version = '1.0.0'
