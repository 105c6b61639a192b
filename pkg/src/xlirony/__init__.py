"""Cross-lingual irony detection for short texts."""

__version__ = "0.1.0"

LANGS = ("ar", "fr", "en")
LABELS = ("non_ironic", "ironic")
