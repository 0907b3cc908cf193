"""Scene parsing with retrieval-based co-occurrence context priors.

For a query image the pipeline retrieves the most similar training images
under four whole-image descriptors, learns block-pair and adjacency
co-occurrence priors from that subset, and fuses the resulting contextual
class probabilities with a per-superpixel visual classifier.
"""

__version__ = "0.1.0"

# Bumped whenever an algorithm constant changes; part of every cache key.
PIPELINE_VERSION = "sceneparse-1"
