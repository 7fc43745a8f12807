"""Bundled run configurations."""
