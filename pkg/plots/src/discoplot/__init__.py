"""Figure rendering for discojam sweep CSVs."""

from .plots import (
    CSV_COLUMNS,
    FigureSpec,
    RenderResult,
    SchemaError,
    SelectionError,
    build_figure,
    read_rows,
    render,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "CSV_COLUMNS",
    "FigureSpec",
    "RenderResult",
    "SchemaError",
    "SelectionError",
    "build_figure",
    "read_rows",
    "render",
]
