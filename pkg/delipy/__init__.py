"""DeLi: density-based clustering of lines and line segments."""

__version__ = '0.1.0'
