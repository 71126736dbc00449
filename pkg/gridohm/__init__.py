"""Two-point resistance on infinite periodic resistor networks."""

__version__ = "1.0.0"
