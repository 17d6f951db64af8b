"""Free-boundary compressible Euler with a vacuum boundary: a numerical laboratory."""

__version__ = "0.1.0"
