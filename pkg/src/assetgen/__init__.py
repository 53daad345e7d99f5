"""assetgen: per-object asset tokens conditioning a small diffusion generator."""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
