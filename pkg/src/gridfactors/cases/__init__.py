"""Bundled grid cases for demos and tests."""

from importlib import resources

from ..case_io import MatpowerCase, parse_matpower


def case6ww_text() -> str:
    """Raw Matpower text of the bundled 6-bus test system."""
    return resources.files(__package__).joinpath("case6ww.m").read_text()


def case6ww() -> MatpowerCase:
    """Parsed 6-bus test system (Wood & Wollenberg / Matpower case6ww)."""
    return parse_matpower(case6ww_text())
