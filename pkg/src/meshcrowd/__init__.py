"""meshcrowd: whole-image multi-person human mesh recovery at desk scale."""

__version__ = "0.1.0"
