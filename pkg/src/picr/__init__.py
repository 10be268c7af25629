"""Workbench for a pi-calculus with explicit channel allocation: parsing,
resource typing, costed reduction, typed transitions and amortized
bisimulation checking."""

__version__ = "0.1.0"
