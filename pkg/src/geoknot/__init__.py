"""Fixed-topology lattice knot sampling, geometric functionals and shortcut probes."""

__version__ = "0.1.0"
FORMAT_VERSION = "geoknot-xyz/1"
