"""Widths of mixed-norm balls, weighted embedding asymptotics and their discretization."""
