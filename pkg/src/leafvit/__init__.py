"""ViT feature extraction with linear projection, CNN classifier heads, and evaluation metrics."""
from .errors import ConfigError, DataError, ParseError, ShapeError, StageError, LeafVitError
from .estimators import CNNClassifier, ThumbnailNormalizer, ViTFeatureExtractor
from .preprocess import Image, NormalizedImage
from .vit import ViTConfig

__all__ = [
    "CNNClassifier",
    "ConfigError",
    "DataError",
    "Image",
    "NormalizedImage",
    "ParseError",
    "ShapeError",
    "StageError",
    "ThumbnailNormalizer",
    "ViTConfig",
    "ViTFeatureExtractor",
    "LeafVitError",
]

__version__ = "0.1.0"
