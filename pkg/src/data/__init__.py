"""Dataset manifests, rendering and binary tensor files."""
