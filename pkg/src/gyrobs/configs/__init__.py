"""Bundled run configurations (TOML)."""
