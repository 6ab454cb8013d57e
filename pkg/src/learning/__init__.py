"""Few-shot model, features, objective and training loop."""
