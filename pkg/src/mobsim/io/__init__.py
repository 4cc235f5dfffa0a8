"""Input parsing, run configuration and output writers."""
