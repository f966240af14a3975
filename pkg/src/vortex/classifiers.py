"""Linear classifiers trained on image descriptors.

Three deliberately hyperparameter-free classifiers: 1-nearest-neighbor on
Euclidean distance, linear discriminant analysis with a Ledoit-Wolf
shrunk pooled covariance, and a linear hinge-loss SVM (penalty 1) solved
by dual coordinate descent.  All three are deterministic given a training
set; the SVM's epoch shuffling runs off a recorded seed.

Fitted models are immutable value objects, safe to share across threads,
and can be stored to a small versioned binary via save_model/load_model.
"""

import json
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._kernels import dual_cd_epoch
from .errors import ConvergenceError, ValidationError

DEFAULT_SVM_PENALTY = 1.0
DEFAULT_SVM_TOL = 1e-4  # relative duality gap: (P - D) <= tol * max(1, |P|)
DEFAULT_SVM_MAX_EPOCHS = 4000
DEFAULT_SVM_SHUFFLE_SEED = 0


def _check_training_set(features, labels):
    features = np.ascontiguousarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
        raise ValidationError(f"training features must be (N, d), got shape {features.shape}")
    if labels.shape != (features.shape[0],):
        raise ValidationError(
            f"labels shape {labels.shape} does not match {features.shape[0]} training rows"
        )
    if not np.isfinite(features).all():
        raise ValidationError("training features contain non-finite values")
    return features, labels


def _as_queries(model_dim, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    queries = np.atleast_2d(x)
    if queries.shape[1] != model_dim:
        raise ValidationError(f"query dimension {queries.shape[1]} != model dimension {model_dim}")
    return queries, single


# ---------------------------------------------------------------------------
# 1-nearest-neighbor


@dataclass(frozen=True)
class NearestNeighborModel:
    """The training set verbatim; prediction = label of the closest row."""

    features: np.ndarray
    labels: np.ndarray

    def predict(self, x):
        queries, single = _as_queries(self.features.shape[1], x)
        out = np.empty(queries.shape[0], dtype=np.int64)
        for i, query in enumerate(queries):
            diff = self.features - query
            sq_dist = np.einsum("ij,ij->i", diff, diff)
            # argmin returns the first minimum: ties go to the lowest index
            out[i] = self.labels[np.argmin(sq_dist)]
        return int(out[0]) if single else out


def knn_fit(features, labels):
    features, labels = _check_training_set(features, labels)
    return NearestNeighborModel(features, labels)


def knn_predict(model, x):
    return model.predict(x)


# ---------------------------------------------------------------------------
# linear discriminant analysis with Ledoit-Wolf shrinkage


def ledoit_wolf_shrinkage(centered):
    """Shrinkage intensity for already-centered rows.

    With S = Z^T Z / n and mu = tr(S)/p, the convex weight toward mu*I is
    min(b, delta)/delta, where delta = ||S - mu I||_F^2 / p measures how
    far S is from spherical and b = (sum_k ||z_k||^4 / n - ||S||_F^2) / (n p)
    estimates the sampling error of S.
    """
    centered = np.asarray(centered, dtype=np.float64)
    n, p = centered.shape
    if p == 1:
        return 0.0
    s = centered.T @ centered / n
    mu = np.trace(s) / p
    delta = np.sum(s * s) / p - mu * mu
    sq_norms = np.einsum("ij,ij->i", centered, centered)
    beta = (np.sum(sq_norms * sq_norms) / n - np.sum(s * s)) / (n * p)
    beta = min(max(beta, 0.0), delta)
    if delta == 0.0 or beta == 0.0:
        return 0.0
    return beta / delta


def ledoit_wolf(centered):
    """Shrunk covariance (1-gamma) S + gamma (tr S / p) I and its gamma."""
    centered = np.asarray(centered, dtype=np.float64)
    n, p = centered.shape
    shrinkage = ledoit_wolf_shrinkage(centered)
    s = centered.T @ centered / n
    mu = np.trace(s) / p
    shrunk = (1.0 - shrinkage) * s
    shrunk.flat[:: p + 1] += shrinkage * mu
    return shrunk, shrinkage


@dataclass(frozen=True)
class LdaModel:
    classes: np.ndarray
    means: np.ndarray
    covariance: np.ndarray = field(repr=False)
    coef: np.ndarray = field(repr=False)
    intercept: np.ndarray
    priors: np.ndarray
    shrinkage: float

    def decision_values(self, x):
        queries, single = _as_queries(self.means.shape[1], x)
        scores = queries @ self.coef.T + self.intercept
        return scores[0] if single else scores

    def predict(self, x):
        queries, single = _as_queries(self.means.shape[1], x)
        scores = queries @ self.coef.T + self.intercept
        picked = self.classes[np.argmax(scores, axis=1)]
        return int(picked[0]) if single else picked


def lda_fit(features, labels):
    """Fit class means and a shrunk pooled covariance, precomputing the
    linear discriminant scores x . coef_c + intercept_c."""
    features, labels = _check_training_set(features, labels)
    classes, class_index = np.unique(labels, return_inverse=True)
    if classes.size < 2:
        raise ValidationError("LDA needs at least two classes")
    counts = np.bincount(class_index)
    means = np.zeros((classes.size, features.shape[1]))
    np.add.at(means, class_index, features)
    means /= counts[:, None]
    priors = counts / features.shape[0]

    centered = features - means[class_index]
    covariance, shrinkage = ledoit_wolf(centered)
    if np.trace(covariance) == 0.0:
        # all samples sit exactly on their class mean; the discriminant
        # degenerates to the Euclidean nearest mean, i.e. identity covariance
        warnings.warn("zero within-class scatter: using identity covariance")
        covariance = np.eye(features.shape[1])
    try:
        coef = scipy.linalg.cho_solve(scipy.linalg.cho_factor(covariance), means.T).T
    except scipy.linalg.LinAlgError:
        warnings.warn("shrunk covariance not numerically positive definite: using least-squares solve")
        coef = scipy.linalg.lstsq(covariance, means.T)[0].T
    intercept = -0.5 * np.einsum("ij,ij->i", means, coef) + np.log(priors)
    return LdaModel(classes, means, covariance, coef, intercept, priors, shrinkage)


def lda_predict(model, x):
    return model.predict(x)


# ---------------------------------------------------------------------------
# linear SVM (hinge loss, dual coordinate descent)


@dataclass(frozen=True)
class LinearSvmModel:
    """One-vs-rest (or one-vs-one) linear decision functions.

    ``weights``/``biases`` hold one row per binary problem; ``pairs`` maps
    each row to the class indices it separates (second entry -1 for
    one-vs-rest rows).  Prediction is decision argmax for one-vs-rest and
    majority vote for one-vs-one, ties resolved toward the lowest class.
    """

    classes: np.ndarray
    scheme: str
    weights: np.ndarray = field(repr=False)
    biases: np.ndarray
    pairs: np.ndarray
    penalty: float
    tol: float
    shuffle_seed: int
    epochs: tuple
    gaps: tuple

    def decision_values(self, x):
        queries, single = _as_queries(self.weights.shape[1], x)
        scores = queries @ self.weights.T + self.biases
        return scores[0] if single else scores

    def predict(self, x):
        queries, single = _as_queries(self.weights.shape[1], x)
        scores = queries @ self.weights.T + self.biases
        if self.scheme == "ovr":
            picked = self.classes[np.argmax(scores, axis=1)]
        else:
            votes = np.zeros((queries.shape[0], self.classes.size))
            for row, (a, b) in enumerate(self.pairs):
                won_a = scores[:, row] >= 0.0
                votes[won_a, a] += 1
                votes[~won_a, b] += 1
            picked = self.classes[np.argmax(votes, axis=1)]
        return int(picked[0]) if single else picked


def _binary_dual_cd(x_aug, target, penalty, tol, max_epochs, rng):
    """Solve one binary subproblem; returns (w_aug, epochs, gap).

    Runs permuted coordinate descent passes until the duality gap
    P(w) - D(alpha) drops below tol * max(1, |P|).
    """
    n_rows = x_aug.shape[0]
    alpha = np.zeros(n_rows)
    w = np.zeros(x_aug.shape[1])
    row_sq_norms = np.einsum("ij,ij->i", x_aug, x_aug)
    gap = np.inf
    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(n_rows).astype(np.intp)
        dual_cd_epoch(x_aug, target, row_sq_norms, alpha, w, order, penalty)
        hinge = np.maximum(0.0, 1.0 - target * (x_aug @ w)).sum()
        w_norm_sq = w @ w
        primal = 0.5 * w_norm_sq + penalty * hinge
        dual = alpha.sum() - 0.5 * w_norm_sq
        gap = primal - dual
        if gap <= tol * max(1.0, abs(primal)):
            return w, epoch, gap
    raise ConvergenceError(
        f"dual coordinate descent did not reach tolerance {tol} within "
        f"{max_epochs} epochs (duality gap {gap:.6e})",
        gap=gap,
    )


def svm_fit(
    features,
    labels,
    penalty=DEFAULT_SVM_PENALTY,
    tol=DEFAULT_SVM_TOL,
    max_epochs=DEFAULT_SVM_MAX_EPOCHS,
    shuffle_seed=DEFAULT_SVM_SHUFFLE_SEED,
    scheme="ovr",
    n_jobs=1,
):
    """Fit linear hinge-loss SVMs, one binary problem per class (one-vs-rest)
    or per class pair (one-vs-one).

    The bias rides along as an extra constant-one feature, which also
    guarantees positive per-row curvature for the coordinate steps.  Each
    binary problem shuffles its epochs with a generator seeded from
    (shuffle_seed, problem index), so refits are bit-reproducible at any
    ``n_jobs``.
    """
    features, labels = _check_training_set(features, labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValidationError("SVM needs at least two classes")
    if scheme not in ("ovr", "ovo"):
        raise ValidationError(f"unknown multiclass scheme {scheme!r}")
    x_aug = np.hstack([features, np.ones((features.shape[0], 1))])

    if scheme == "ovr":
        problems = [(i, -1) for i in range(classes.size)]
        targets = [np.where(labels == classes[i], 1.0, -1.0) for i, _ in problems]
        rows_list = [None] * len(problems)
    else:
        problems = []
        targets = []
        rows_list = []
        for i in range(classes.size):
            for j in range(i + 1, classes.size):
                rows = np.flatnonzero((labels == classes[i]) | (labels == classes[j]))
                problems.append((i, j))
                targets.append(np.where(labels[rows] == classes[i], 1.0, -1.0))
                rows_list.append(rows)

    def solve(index):
        rows = rows_list[index]
        x_sub = x_aug if rows is None else np.ascontiguousarray(x_aug[rows])
        rng = np.random.default_rng([shuffle_seed, index])
        return _binary_dual_cd(x_sub, targets[index], penalty, tol, max_epochs, rng)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            solutions = list(pool.map(solve, range(len(problems))))
    else:
        solutions = [solve(i) for i in range(len(problems))]

    weights = np.vstack([w[:-1] for w, _, _ in solutions])
    biases = np.array([w[-1] for w, _, _ in solutions])
    return LinearSvmModel(
        classes=classes,
        scheme=scheme,
        weights=weights,
        biases=biases,
        pairs=np.array(problems, dtype=np.int64),
        penalty=penalty,
        tol=tol,
        shuffle_seed=shuffle_seed,
        epochs=tuple(ep for _, ep, _ in solutions),
        gaps=tuple(g for _, _, g in solutions),
    )


def svm_predict(model, x):
    return model.predict(x)


def svm_primal_objective(weights_aug, x_aug, target, penalty):
    """0.5 ||w||^2 + penalty * sum hinge, for oracle comparisons."""
    hinge = np.maximum(0.0, 1.0 - target * (x_aug @ weights_aug)).sum()
    return 0.5 * weights_aug @ weights_aug + penalty * hinge


# ---------------------------------------------------------------------------
# shared helpers


def accuracy(model, features, labels):
    """Fraction of correct predictions on a labeled set."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.shape[0] < 1:
        raise ValidationError("accuracy needs a non-empty test set")
    return float(np.mean(model.predict(features) == labels))


_MODEL_MAGIC = b"VTM\0"
_MODEL_VERSION = 1
_U32 = struct.Struct("<I")


def _pack(model):
    if isinstance(model, NearestNeighborModel):
        return "knn", {"features": model.features, "labels": model.labels}, {}
    if isinstance(model, LdaModel):
        arrays = {
            "classes": model.classes,
            "means": model.means,
            "covariance": model.covariance,
            "coef": model.coef,
            "intercept": model.intercept,
            "priors": model.priors,
        }
        return "lda", arrays, {"shrinkage": model.shrinkage}
    if isinstance(model, LinearSvmModel):
        arrays = {
            "classes": model.classes,
            "weights": model.weights,
            "biases": model.biases,
            "pairs": model.pairs,
        }
        meta = {
            "scheme": model.scheme,
            "penalty": model.penalty,
            "tol": model.tol,
            "shuffle_seed": model.shuffle_seed,
            "epochs": list(model.epochs),
            "gaps": list(model.gaps),
        }
        return "svm", arrays, meta
    raise ValidationError(f"cannot serialize model of type {type(model).__name__}")


def save_model(model, path):
    """Store a fitted model as magic + version + JSON header + raw arrays."""
    kind, arrays, meta = _pack(model)
    canonical = {
        name: np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<"))
        for name, arr in arrays.items()
    }
    header = {
        "kind": kind,
        "meta": meta,
        "arrays": [
            {"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)}
            for name, arr in canonical.items()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as out:
        out.write(_MODEL_MAGIC)
        out.write(_U32.pack(_MODEL_VERSION))
        out.write(_U32.pack(len(blob)))
        out.write(blob)
        for arr in canonical.values():
            out.write(arr.tobytes())


def load_model(path):
    from .interchange import _read_exact, _read_header  # same framing helpers

    with open(path, "rb") as handle:
        _read_header(handle, _MODEL_MAGIC, (_MODEL_VERSION,), "model")
        (blob_len,) = _U32.unpack(_read_exact(handle, 4, "model header length"))
        header = json.loads(_read_exact(handle, blob_len, "model header"))
        arrays = {}
        for spec in header["arrays"]:
            dtype = np.dtype(spec["dtype"])
            count = int(np.prod(spec["shape"])) if spec["shape"] else 1
            raw = _read_exact(handle, dtype.itemsize * count, f"array {spec['name']}")
            arrays[spec["name"]] = np.frombuffer(raw, dtype=dtype).reshape(spec["shape"]).copy()
    kind, meta = header["kind"], header["meta"]
    if kind == "knn":
        return NearestNeighborModel(arrays["features"], arrays["labels"])
    if kind == "lda":
        return LdaModel(
            classes=arrays["classes"],
            means=arrays["means"],
            covariance=arrays["covariance"],
            coef=arrays["coef"],
            intercept=arrays["intercept"],
            priors=arrays["priors"],
            shrinkage=meta["shrinkage"],
        )
    if kind == "svm":
        return LinearSvmModel(
            classes=arrays["classes"],
            scheme=meta["scheme"],
            weights=arrays["weights"],
            biases=arrays["biases"],
            pairs=arrays["pairs"],
            penalty=meta["penalty"],
            tol=meta["tol"],
            shuffle_seed=meta["shuffle_seed"],
            epochs=tuple(meta["epochs"]),
            gaps=tuple(meta["gaps"]),
        )
    raise ValidationError(f"unknown model kind {kind!r}")
