"""Online fault classification for HPC nodes from windowed metric statistics."""

__version__ = "0.1.0"
