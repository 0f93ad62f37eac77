"""Forward model for multi-mode quasi-phase-matched PDC and SHG in rectangular waveguides."""

__version__ = "0.1.0"
