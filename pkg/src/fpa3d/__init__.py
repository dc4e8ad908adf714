"""3D feature pyramid attention for lipreading, built on numpy."""

__version__ = "0.1.0"
