"""Process-level helpers: worker pool, run-directory lock, resource monitor."""
