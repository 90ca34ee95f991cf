"""Unit tests for hypconvex."""
