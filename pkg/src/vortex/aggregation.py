"""Multi-depth token aggregation and the two pooling baselines.

The aggregated representation of an image stacks every block's spatial
tokens into one (l*n) x d matrix, block 1 first, and rescales each column
to unit l2 norm so no single feature dimension dominates downstream
least-squares solves.  The two baselines reduce a record to d features
directly: the mean over spatial tokens (GAP) or the final-block CLS token.
"""

import numpy as np

from .errors import ValidationError


def aggregate(record):
    """Stack all layers' tokens and l2-normalize the columns.

    Returns an (l*n, d) float64 matrix whose row block i*n..(i+1)*n-1 comes
    from layer i+1.  Columns that are identically zero are left at zero
    instead of erroring, so one dead feature cannot poison an image.
    """
    record.validate()
    stacked = record.layers.reshape(record.n_layers * record.n_tokens, record.n_features)
    stacked = stacked.astype(np.float64)
    norms = np.sqrt(np.sum(stacked * stacked, axis=0))
    nonzero = norms > 0.0
    stacked[:, nonzero] /= norms[nonzero]
    return stacked


def gap_descriptor(record, layer="last"):
    """Mean over the spatial tokens of one layer (or of all layers).

    ``layer`` is a 1-based block index, "last" (default) or "all".
    """
    record.validate()
    if layer == "last":
        layer = record.n_layers
    if layer == "all":
        tokens = record.layers.reshape(-1, record.n_features)
    else:
        if not isinstance(layer, int) or not 1 <= layer <= record.n_layers:
            raise ValidationError(
                f"record {record.image_id!r}: layer must be 'last', 'all' or an index in "
                f"[1, {record.n_layers}], got {layer!r}"
            )
        tokens = record.layers[layer - 1]
    return tokens.astype(np.float64).mean(axis=0)


def cls_descriptor(record):
    """The final-block CLS token carried in the record's side channel."""
    if record.cls_token is None:
        raise ValidationError(
            f"record {record.image_id!r} carries no CLS token; re-run extraction with CLS enabled"
        )
    record.validate()
    return record.cls_token.astype(np.float64)
