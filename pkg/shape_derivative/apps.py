from django.apps import AppConfig


class ShapeDerivativeConfig(AppConfig):
    name = 'shape_derivative'
    verbose_name = 'Shape derivatives'
    version = '1.0.0'
