"""Context-aware histology image classification.

Stain normalization, patch tiling, per-patch features, k-by-k context
blocks, PCA reduction, one-vs-one RBF-SVM, and image-level majority
voting, plus evaluation tooling and a CLI (``ctxpath``).
"""

from . import color, errors, evaluation, features, manifest, pca, pipeline, svm, synthetic, tiling

__all__ = [
    "color",
    "errors",
    "evaluation",
    "features",
    "manifest",
    "pca",
    "pipeline",
    "svm",
    "synthetic",
    "tiling",
]

__version__ = "0.1.0"
