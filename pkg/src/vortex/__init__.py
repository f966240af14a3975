"""Orderless randomized token encodings for texture recognition.

The pipeline: stack every transformer block's spatial tokens of an image,
l2-normalize the columns, train m closed-form randomized autoencoders on
the stack (encoder weights from one fixed congruential stream), and sum
the m decoder vectors into a d-dimensional descriptor that is invariant
to token order.  Descriptors feed 1-NN, shrinkage LDA or a linear SVM.
"""

__version__ = "0.1.0"

from ._kernels import KERNEL_BACKEND
from .aggregation import aggregate, cls_descriptor, gap_descriptor
from .bench import (
    ExtractorConfig,
    RunReport,
    SyntheticTextureSpec,
    compare_extractors,
    encode_descriptors,
    generate_synthetic,
    run_protocol,
    soup_ablation,
)
from .classifiers import (
    accuracy,
    knn_fit,
    knn_predict,
    lda_fit,
    lda_predict,
    load_model,
    save_model,
    svm_fit,
    svm_predict,
)
from .errors import (
    BadMagicError,
    ConvergenceError,
    FormatError,
    ManifestError,
    TruncatedPayloadError,
    ValidationError,
    VersionMismatchError,
    VortexError,
)
from .interchange import (
    DescriptorRecord,
    EmbeddingRecord,
    Fold,
    SplitManifest,
    VteWriter,
    iter_vtd,
    iter_vte,
    load_manifest,
    read_vtd,
    read_vte,
    save_manifest,
    write_vtd,
    write_vte,
)
from .prng import lcg_stream, synthesize_encoder
from .rae import (
    encode_forward,
    solve_decoder,
    vortex_descriptor_series,
    vortex_encode,
)

__all__ = [
    "KERNEL_BACKEND",
    "__version__",
    "aggregate",
    "cls_descriptor",
    "gap_descriptor",
    "ExtractorConfig",
    "RunReport",
    "SyntheticTextureSpec",
    "compare_extractors",
    "encode_descriptors",
    "generate_synthetic",
    "run_protocol",
    "soup_ablation",
    "accuracy",
    "knn_fit",
    "knn_predict",
    "lda_fit",
    "lda_predict",
    "load_model",
    "save_model",
    "svm_fit",
    "svm_predict",
    "BadMagicError",
    "ConvergenceError",
    "FormatError",
    "ManifestError",
    "TruncatedPayloadError",
    "ValidationError",
    "VersionMismatchError",
    "VortexError",
    "DescriptorRecord",
    "EmbeddingRecord",
    "Fold",
    "SplitManifest",
    "VteWriter",
    "iter_vtd",
    "iter_vte",
    "load_manifest",
    "read_vtd",
    "read_vte",
    "save_manifest",
    "write_vtd",
    "write_vte",
    "lcg_stream",
    "synthesize_encoder",
    "encode_forward",
    "solve_decoder",
    "vortex_descriptor_series",
    "vortex_encode",
]
