"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid model, metric, or run configuration (including dimension mismatches)."""


class InitializationError(RuntimeError):
    """Chain could not be initialized (e.g. non-finite potential at the start point)."""


class StepSearchError(RuntimeError):
    """No step size in the admissible range met the acceptance target."""


class UnsupportedModelError(TypeError):
    """Operation requested on a model kind that does not support it."""
