"""Device-independent randomness expansion: entropy bounds, finite-round rates
and protocol simulation."""

__version__ = "0.1.0"
