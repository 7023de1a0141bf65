"""Bridge from torch image classifiers to the OSAV activation format."""

from .extract import ExtractionError, ExtractionJob, extract
from .writer import write_osav

__all__ = ["ExtractionError", "ExtractionJob", "extract", "write_osav"]

__version__ = "0.1.0"
