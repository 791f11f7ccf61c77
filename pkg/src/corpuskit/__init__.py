"""Corpus curation toolkit: clean, deduplicate, filter, split, audit, evaluate."""

__version__ = "0.1.0"
