class SphereSWError(Exception):
    """Base error for every failure raised by sphere_sw."""


class SphereSWWarning(UserWarning):
    """Emitted for recoverable numerical situations (clipping, capping, renormalizing)."""


class DimensionError(SphereSWError):
    """Raised when a dimension is invalid or two objects disagree on dimension."""


class SphereDomainError(SphereSWError):
    """Raised when a coordinate lies outside its admissible domain."""


class MeasureError(SphereSWError):
    """Raised when a discrete measure has invalid atoms or weights."""


class PointCloudFormatError(MeasureError):
    """Raised when a point-cloud CSV file is empty, ragged or carries negative weights."""


class TransportError(SphereSWError):
    """Raised for invalid one-dimensional transport inputs (order p < 1, empty inputs)."""


class HarmonicsError(SphereSWError):
    """Base error for spherical harmonics evaluation."""


class BasisConstructionError(HarmonicsError):
    """Raised when no well-conditioned fundamental set could be built."""


class QuadratureError(SphereSWError):
    """Base error for quadrature node generation."""


class RejectionBudgetError(QuadratureError):
    """Raised when a rejection sampler exhausts its proposal budget."""


class NumericalDegeneracyError(QuadratureError):
    """Raised when a sampler hits a numerically degenerate configuration."""


class UnknownMethodError(QuadratureError):
    """Raised when a method name is not in the quadrature registry."""


class EstimatorError(SphereSWError):
    """Base error for estimator assembly."""


class ControlVariateError(EstimatorError):
    """Raised when a control-variate regression cannot be set up."""


class SpectralError(SphereSWError):
    """Raised for invalid spectral-profile computations."""


class ConfigError(SphereSWError):
    """Raised when an experiment configuration is invalid."""
