"""nash_evo: approximate Nash equilibria of dynamic games with co-evolutionary GA and hybrid PSO."""

__version__ = "0.1.0"
