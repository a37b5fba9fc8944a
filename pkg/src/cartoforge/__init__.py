"""Map style transfer and evaluation pipeline."""

__version__ = "0.1.0"

from .stylesheet import (  # noqa: F401
    LayerManifest,
    ReviewSuggestion,
    ReviewVerdict,
    StyleSheet,
    apply_suggestions,
    parse_stylesheet,
    serialize_stylesheet,
    validate_completeness,
)
