"""Metrología con gases cuánticos con acoplamiento espín-órbita."""

__version__ = "0.3.0"
