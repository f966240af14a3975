"""Deterministic synthesis of random encoder weights.

All encoder randomness comes from a single fixed linear congruential
generator,

    x_{t+1} = (75 * x_t + 74) mod 65537,   x_0 = 0.

75 is a primitive root modulo the prime 65537, so the stream visits every
value in [0, 65536) exactly once before repeating; closed form
x_t = 75^t - 1 (mod 65537).  A seed is *not* a generator state but a
starting index into this one shared stream: encoder ``k`` consumes values
x_{k+1} ... x_{k+d*q}.  Because the whole period fits in a quarter-MB
table, any segment can be served by indexing a cached array, which keeps
weight synthesis bit-identical across runs, platforms and thread counts.
"""

from functools import lru_cache

import numpy as np

from .errors import ValidationError

LCG_MULTIPLIER = 75
LCG_INCREMENT = 74
LCG_MODULUS = 2**16 + 1
LCG_PERIOD = LCG_MODULUS - 1

#: How encoder seeds map to stream positions.  "literal" reads the seed as
#: the starting index itself (segments of consecutive seeds overlap, which
#: is fine: standardization still yields distinct directions).  "disjoint"
#: starts encoder k at k*d*q so segments never share draws.
SEED_MODES = ("literal", "disjoint")


@lru_cache(maxsize=1)
def _stream_table():
    """The full period x_1 .. x_{65536} as a read-only int64 array."""
    table = np.empty(LCG_PERIOD, dtype=np.int64)
    x = 0
    for i in range(LCG_PERIOD):
        x = (LCG_MULTIPLIER * x + LCG_INCREMENT) % LCG_MODULUS
        table[i] = x
    table.flags.writeable = False
    return table


def lcg_stream(start_index, count):
    """Return stream values x_{start_index+1} ... x_{start_index+count}.

    ``start_index`` is a non-negative offset into the shared stream; the
    recurrence itself is never re-run, values are sliced from the cached
    period table (indices wrap every 65536 draws).
    """
    if start_index < 0:
        raise ValidationError("start_index must be non-negative")
    if count < 1:
        raise ValidationError("count must be a positive integer")
    idx = (start_index + np.arange(count, dtype=np.int64)) % LCG_PERIOD
    return _stream_table()[idx]


def stream_start(seed, dim, hidden, seed_mode="literal"):
    """Stream index at which the encoder for ``seed`` starts reading."""
    if seed_mode not in SEED_MODES:
        raise ValidationError(f"unknown seed_mode {seed_mode!r}; expected one of {SEED_MODES}")
    return seed if seed_mode == "literal" else seed * dim * hidden


def synthesize_encoder(seed, dim, hidden=1, seed_mode="literal"):
    """Deterministic encoder weight matrix of shape (dim, hidden).

    Draws dim*hidden stream values starting at the index given by
    ``seed``/``seed_mode``, fills the matrix column by column, standardizes
    all entries to zero mean and unit population variance, and finally
    orthonormalizes: a single column is rescaled to unit norm, multiple
    columns are replaced by the Q factor of the thin QR decomposition
    (signs fixed so the result is unique).

    Fully determined by (seed, dim, hidden, seed_mode); regenerable
    bit-identically.
    """
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    if hidden < 1:
        raise ValidationError("hidden must be >= 1")
    if hidden > dim:
        raise ValidationError(f"hidden units ({hidden}) cannot exceed dim ({dim})")
    if seed < 0:
        raise ValidationError("seed must be non-negative")

    draws = lcg_stream(stream_start(seed, dim, hidden, seed_mode), dim * hidden)
    values = draws.astype(np.float64)
    std = values.std()  # population (1/N) variance
    if std == 0.0:
        raise ValidationError(f"degenerate draw for seed {seed}: all {dim * hidden} values equal")
    standardized = (values - values.mean()) / std
    weights = standardized.reshape((dim, hidden), order="F")

    if hidden == 1:
        return weights / np.linalg.norm(weights)

    q, r = np.linalg.qr(weights, mode="reduced")
    diag = np.diag(r)
    if np.any(diag == 0.0):
        raise ValidationError(f"linearly dependent columns for seed {seed}")
    # sign convention: positive R diagonal, so Q is the unique orthonormal factor
    return q * np.where(diag < 0.0, -1.0, 1.0)
