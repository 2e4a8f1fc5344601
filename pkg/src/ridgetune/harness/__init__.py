"""Simulation harness and command-line tools."""
