"""Shared test fixtures and builders."""

from __future__ import annotations

from pathlib import Path

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
LEXICONS = FIXTURES / "lexicons"


def make_record(_id: str = "ncbi-sra_SRP900001", **overrides) -> dict:
    """Minimal record passing required-tier validation; overrides merge on top."""
    record = {
        "_id": _id,
        "name": "Influenza host response",
        "description": "Host transcriptional response to influenza infection.",
        "identifier": "SRP900001",
        "url": "https://example.org/datasets/SRP900001",
        "includedInDataCatalog": {"name": "NCBI SRA"},
    }
    record.update(overrides)
    return record
