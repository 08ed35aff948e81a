"""Growth analysis of f'' + A f' + B f = 0 with exp-polynomial coefficients."""

__version__ = "0.1.0"
