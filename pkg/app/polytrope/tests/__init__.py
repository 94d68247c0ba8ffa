"""Tests for the polytrope slice."""
