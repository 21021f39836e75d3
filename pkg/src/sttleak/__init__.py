"""Supply-current side-channel laboratory for STTRAM word writes."""

__version__ = "0.1.0"
