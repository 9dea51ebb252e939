"""Design and analysis toolkit for superconducting CPW resonators."""

__version__ = "0.1.0"
