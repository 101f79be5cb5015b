"""Summary reports."""
