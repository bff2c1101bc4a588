"""Dual-system navigation harness."""
