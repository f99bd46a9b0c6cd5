"""Kernel-Blau-Ising model: joint simulation and ABC inference of social
networks and behaviour from aggregated snapshot outcomes."""

__version__ = "0.1.0"
