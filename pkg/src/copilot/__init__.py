"""Mission orchestration for single-operator multi-robot deployments."""

__version__ = "0.1.0"
