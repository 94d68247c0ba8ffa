"""Batch orchestration over the polytrope modules."""
