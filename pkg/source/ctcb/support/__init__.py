"""Numerical and storage helpers shared by the ctcb modules."""
