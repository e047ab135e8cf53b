"""Link-share engagement analysis: multiplex social graph, taste embeddings,
engagement labels, point-in-time features, statistics and a random forest."""
from .config import ConfigError, RunConfig
from .engagement import PlaybackLog, daily_engagement_value
from .features import FEATURE_COLUMNS, ExtractionContext, FeatureSetId, build_dataset, extract_features
from .multiplex import LayerKind, MultiplexNetwork

__version__ = "0.1.0"

__all__ = ["ConfigError", "RunConfig", "PlaybackLog", "daily_engagement_value", "FEATURE_COLUMNS",
           "ExtractionContext", "FeatureSetId", "build_dataset", "extract_features", "LayerKind",
           "MultiplexNetwork"]
