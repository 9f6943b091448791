"""Dataset-metadata harmonization, enrichment, and faceted search."""

__version__ = "0.1.0"
