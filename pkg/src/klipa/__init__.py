"""Knowledge-graph construction and agentic hybrid retrieval over patent corpora."""

__version__ = "0.1.0"
