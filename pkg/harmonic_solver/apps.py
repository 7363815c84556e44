from django.apps import AppConfig


class HarmonicSolverConfig(AppConfig):
    name = 'harmonic_solver'
    verbose_name = 'Boundary integral solver'
    version = '1.0.0'
