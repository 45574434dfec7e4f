"""gridshield: attack and defense simulator for dynamic power state estimation."""

__version__ = "0.1.0"
