"""Homogeneous distances on the Heisenberg group and BCP checks."""
