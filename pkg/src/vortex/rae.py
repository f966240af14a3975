"""Randomized autoencoder encoding of aggregated tokens.

Each image trains m tiny one-hidden-unit autoencoders on its own token
matrix: the encoder weights are fixed pseudo-random vectors (see prng),
the decoder is the closed-form least-squares reconstruction of the tokens
from the hidden activations, and the image descriptor is the sum of the m
decoder vectors, accumulated in seed order.  Every step is a reduction
over token rows, so the descriptor is invariant to token order up to
floating-point summation effects.

The decoder solve is the minimum-norm least-squares solution f = pinv(g) x.
For the single-hidden-unit case this is the one-unknown normal equation
per column, f = (g . x_j) / (g . g); the textbook expression
g^T (g g^T)^{-1} x is singular for one hidden unit and more than one row,
and the pseudo-inverse is its well-defined completion (they coincide
whenever the former exists).
"""

import warnings

import numpy as np
import scipy.linalg

from .aggregation import aggregate
from .errors import ValidationError
from .prng import synthesize_encoder


def sigmoid(x):
    # exp may overflow to inf for large negative inputs; 1/(1+inf) = 0 is
    # exactly the saturated value, so the warning is suppressed, not the math
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def encode_forward(tokens, weights):
    """Hidden activations g = sigmoid(tokens @ weights).

    ``tokens`` is the (rows, d) aggregated matrix; ``weights`` is (d,) or
    (d, q).  The output shape follows the weights: (rows,) or (rows, q).
    """
    tokens = np.asarray(tokens, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if tokens.ndim != 2:
        raise ValidationError(f"tokens must be 2-D, got shape {tokens.shape}")
    if tokens.shape[1] != weights.shape[0]:
        raise ValidationError(
            f"dimension mismatch: tokens have d={tokens.shape[1]}, weights expect d={weights.shape[0]}"
        )
    return sigmoid(tokens @ weights)


def solve_decoder(activations, tokens, ridge=0.0, warn=True):
    """Least-squares decoder weights reconstructing ``tokens`` from ``activations``.

    Returns the minimum-norm solution of min_f ||g f - tokens||_F with
    g = ``activations``; shape (q, d), or (d,) when g is a vector.  A
    rank-deficient g is reported via a warning and resolved with the
    pseudo-inverse (singular values below max(rows, d) * eps * s_max are
    cut off).  ``ridge`` > 0 switches to the regularized normal equations
    (g^T g + ridge I) f = g^T tokens.
    """
    activations = np.asarray(activations, dtype=np.float64)
    tokens = np.asarray(tokens, dtype=np.float64)
    single = activations.ndim == 1
    g = activations[:, None] if single else activations
    if g.ndim != 2:
        raise ValidationError(f"activations must be 1-D or 2-D, got shape {activations.shape}")
    rows, hidden = g.shape
    if tokens.ndim != 2 or tokens.shape[0] != rows:
        raise ValidationError(
            f"row mismatch: activations have {rows} rows, tokens have shape {tokens.shape}"
        )
    if rows < hidden:
        raise ValidationError(f"need at least as many rows ({rows}) as hidden units ({hidden})")
    if ridge < 0.0:
        raise ValidationError("ridge must be >= 0")

    if hidden == 1:
        vec = g[:, 0]
        gram = vec @ vec
        if ridge > 0.0:
            decoder = (vec @ tokens) / (gram + ridge)
        elif gram == 0.0:
            if warn:
                warnings.warn("zero activation vector: decoder falls back to the zero solution")
            decoder = np.zeros((1, tokens.shape[1]))
        else:
            decoder = (vec @ tokens) / gram
        decoder = np.atleast_2d(decoder)
    elif ridge > 0.0:
        gram = g.T @ g + ridge * np.eye(hidden)
        decoder = scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), g.T @ tokens)
    else:
        cutoff = max(rows, tokens.shape[1]) * np.finfo(np.float64).eps
        decoder, _, rank, _ = scipy.linalg.lstsq(g, tokens, cond=cutoff, lapack_driver="gelsd")
        if rank < hidden and warn:
            warnings.warn(
                f"rank-deficient activations (rank {rank} < {hidden}): "
                f"using the pseudo-inverse with relative cutoff {cutoff:.3e}"
            )
    return decoder[0] if single else decoder


def decoder_term(tokens, seed, seed_mode="literal"):
    """Decoder vector (d,) of the autoencoder with encoder seed ``seed``."""
    weights = synthesize_encoder(seed, tokens.shape[1], 1, seed_mode)[:, 0]
    activations = encode_forward(tokens, weights)
    return solve_decoder(activations, tokens)


def vortex_descriptor_series(record, soup_sizes, seed_mode="literal"):
    """Descriptors for several soup sizes in one pass over the seeds.

    Returns {m: descriptor} for every m in ``soup_sizes``.  The running sum
    is accumulated in seed order 1..max(m), so each returned descriptor is
    bit-identical to a standalone ``vortex_encode`` with the same m.
    """
    sizes = sorted(set(int(m) for m in soup_sizes))
    if not sizes:
        raise ValidationError("soup_sizes must be non-empty")
    if sizes[0] < 1:
        raise ValidationError(f"soup sizes must be >= 1, got {sizes[0]}")
    tokens = aggregate(record)
    wanted = set(sizes)
    series = {}
    total = np.zeros(tokens.shape[1])
    for seed in range(1, sizes[-1] + 1):
        total += decoder_term(tokens, seed, seed_mode)
        if seed in wanted:
            series[seed] = total.copy()
    return series


def vortex_encode(record, soup_size=16, seed_mode="literal"):
    """The d-dimensional descriptor of one record: sum of ``soup_size``
    decoder vectors for seeds 1..soup_size, accumulated in seed order."""
    return vortex_descriptor_series(record, [soup_size], seed_mode)[soup_size]
