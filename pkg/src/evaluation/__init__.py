"""Metric computation, per-split reports and source-location error maps."""
