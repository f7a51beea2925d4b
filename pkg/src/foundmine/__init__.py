"""Mine latent structure from high-dimensional categorical found data.

The toolkit covers the full workflow for exploring a wide categorical table
of unknown provenance: co-cluster its missingness pattern with a Bernoulli
latent block model, rank attributes and measure their interactions with an
unsupervised random forest, reduce the nominal attributes to latent
dimensions with specific multiple correspondence analysis, and cluster
entities along those dimensions with Ward's method.
"""

__version__ = "0.1.0"

from foundmine.errors import (
    DegenerateFitError,
    DimensionError,
    FoundmineError,
    NumericalError,
    ParseError,
    PipelineError,
    SchemaError,
    ValidationError,
)

__all__ = [
    "FoundmineError",
    "ValidationError",
    "SchemaError",
    "ParseError",
    "DimensionError",
    "NumericalError",
    "DegenerateFitError",
    "PipelineError",
]
