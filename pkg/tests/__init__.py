"""Tests package for fairsynth."""
