"""plotkit: figure rendering for buschain CSV outputs."""

__version__ = "0.1.0"

from .render import FigureSpec, SchemaError, render  # noqa: F401
