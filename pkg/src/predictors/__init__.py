"""Everything that turns a context and queries into predicted RIRs."""
