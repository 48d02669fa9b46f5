"""Monte Carlo laboratory for the interchange process and the cyclic
time random walk."""

__version__ = "0.1.0"
