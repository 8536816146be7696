"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes: configuration errors exit 2,
ingestion errors exit 3, divergence exits 4, invariant failures exit 5.
"""


class OptlabError(Exception):
    """Base class for all package errors."""


class ShapeError(OptlabError):
    """Input has the wrong shape, symmetry, or dimension chain."""


class SingularMatrixError(OptlabError):
    """A matrix power or inverse is undefined (zero eigenvalue, no damping)."""


class DegenerateInputError(OptlabError):
    """Numerically rank-deficient input where full rank is required."""


class ConfigError(OptlabError):
    """Invalid or inconsistent run configuration."""


class IngestionError(OptlabError):
    """A data file is missing, truncated, or unreadable."""


class CorruptDataError(IngestionError):
    """A data file parsed but contains out-of-range values."""


class DivergenceError(OptlabError):
    """A parameter block went non-finite during a step."""

    def __init__(self, block_id: str, step: int):
        self.block_id = block_id
        self.step = step
        super().__init__(f"non-finite update in block '{block_id}' at step {step}")


class CurvatureError(OptlabError):
    """A curvature factor could not be inverted or decomposed."""

    def __init__(self, layer_id: str, detail: str = ""):
        self.layer_id = layer_id
        msg = f"curvature failure in layer '{layer_id}'"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class SequencingError(OptlabError):
    """A stateful operation was called out of its required order."""


class ScheduleExhaustedError(OptlabError):
    """The training loop asked for a learning rate past the horizon."""
