"""Purchase-intention knowledge graph construction pipeline."""

__version__ = "0.1.0"
