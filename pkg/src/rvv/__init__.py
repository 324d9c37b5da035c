"""In-memory row store with row-version stamping and a schedule simulator."""

__version__ = "0.1.0"
