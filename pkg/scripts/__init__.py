"""Command-line scripts package."""
