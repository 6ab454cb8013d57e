"""Command-line workflows: generate, train, eval, error-map, sweep-context, gradcheck."""
