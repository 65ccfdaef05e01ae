"""Grounding natural-language navigation commands to linear temporal logic."""

__version__ = "0.1.0"


def data_file(*parts: str):
    """Path of a file shipped under ``groundltl/data``."""
    from importlib import resources

    return resources.files("groundltl").joinpath("data", *parts)
