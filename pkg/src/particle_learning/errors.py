"""Exception hierarchy.

Numerical failures derive from :class:`NumericalError` so the command line
can map them to a dedicated exit status; input problems derive from
:class:`ValueError`.
"""


class ParticleLearningError(Exception):
    """Base class for all package errors."""


class NumericalError(ParticleLearningError):
    """A computation produced an unusable numerical state."""


class AllWeightsDegenerate(NumericalError):
    """Every log-weight is -inf, or a NaN/+inf weight is present."""


class SingularInnovation(NumericalError):
    """The one-step predictive covariance of the observation is singular."""


class SingularKernelCovariance(NumericalError):
    """The Liu-West kernel covariance of the parameter cloud is rank deficient."""


class GridUnderflow(NumericalError):
    """All cells of a grid posterior have zero mass."""


class UnsupportedConditioningSet(ParticleLearningError, NotImplementedError):
    """The model has no closed form for the requested particle contents."""


class MissingHistory(ParticleLearningError):
    """Smoothing was requested on a run that did not store its history."""


class MissingOracle(ParticleLearningError):
    """A metric needs reference quantiles that were not supplied."""


class InvalidData(ParticleLearningError, ValueError):
    """Observation sequence is empty, ragged or non-finite."""


class LengthMismatch(ParticleLearningError, ValueError):
    """Two sequences that must align have different lengths or shapes."""


class ConfigError(ParticleLearningError, ValueError):
    """Invalid or unknown configuration."""
