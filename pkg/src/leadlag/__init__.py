"""Lead-lag analysis between search-query activity and trading activity."""

__version__ = "0.1.0"
