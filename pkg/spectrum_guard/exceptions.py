"""
Exception hierarchy for spectrum_guard.

Every error carries a short machine-readable ``code`` which the CLI emits in
its stderr error JSON.
"""


class SpectrumGuardError(Exception):
    """Base class for all toolkit errors."""

    code = "error"


class ConfigError(SpectrumGuardError, ValueError):
    """Invalid or impossible configuration."""

    code = "config_error"


class InputDomainError(SpectrumGuardError, ValueError):
    """A value lies outside the domain an operation accepts."""

    code = "input_domain_error"


class ShapeMismatchError(SpectrumGuardError, ValueError):
    """An array or tensor has the wrong shape."""

    code = "shape_mismatch"


class EmptyDatasetError(SpectrumGuardError, ValueError):
    """Training or fitting was requested on no data."""

    code = "empty_dataset"


class DatasetError(SpectrumGuardError):
    """A dataset on disk is missing or inconsistent with its manifest."""

    code = "dataset_error"


class CheckpointMismatchError(SpectrumGuardError):
    """A checkpoint does not fit the architecture or dataset it is used with."""

    code = "checkpoint_mismatch"
