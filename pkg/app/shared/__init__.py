"""Cross-module numerics and output formatting."""
