"""
Experiment errors
"""


class ExperimentError(Exception):
    """Base class for batch experiment failures."""


class ConfigurationError(ExperimentError, ValueError):
    """The experiment configuration cannot be run as given."""


class ArtifactError(ExperimentError):
    """An output file could not be written."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
