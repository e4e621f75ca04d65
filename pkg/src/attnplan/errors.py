"""Exception types shared across the library."""


class ShapeError(ValueError):
    """Operand shapes are inconsistent."""


class MaskError(ValueError):
    """A softmax mask leaves some row with no allowed position."""


class ConfigError(ValueError):
    """A configuration value is out of range."""


class CacheMissError(RuntimeError):
    """A reuse operation found no cached source tensor."""


class OrderingError(RuntimeError):
    """A within-step reuse ran before its producer."""


class PlanError(ValueError):
    """A compression plan is malformed or infeasible."""


class SimilarityError(ValueError):
    """Similarity is undefined for the given inputs."""
