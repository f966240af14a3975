# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop of the linear SVM dual coordinate descent solver."""


def dual_cd_epoch(const double[:, ::1] x, const double[::1] y,
                  const double[::1] row_sq_norms, double[::1] alpha,
                  double[::1] w, const Py_ssize_t[::1] order, double penalty):
    """One coordinate descent pass over the samples listed in ``order``.

    Updates ``alpha`` and the primal vector ``w`` in place and returns the
    number of coordinates that moved.  ``row_sq_norms[i]`` must equal
    ``x[i] . x[i]`` and be positive (guaranteed by the bias column).
    """
    cdef Py_ssize_t n_cols = x.shape[1]
    cdef Py_ssize_t t, i, j
    cdef Py_ssize_t updates = 0
    cdef double grad, projected, old, new, step

    with nogil:
        for t in range(order.shape[0]):
            i = order[t]
            grad = 0.0
            for j in range(n_cols):
                grad += w[j] * x[i, j]
            grad = y[i] * grad - 1.0

            if alpha[i] == 0.0:
                projected = grad if grad < 0.0 else 0.0
            elif alpha[i] == penalty:
                projected = grad if grad > 0.0 else 0.0
            else:
                projected = grad

            if projected != 0.0:
                old = alpha[i]
                new = old - grad / row_sq_norms[i]
                if new < 0.0:
                    new = 0.0
                elif new > penalty:
                    new = penalty
                alpha[i] = new
                step = (new - old) * y[i]
                if step != 0.0:
                    updates += 1
                    for j in range(n_cols):
                        w[j] += step * x[i, j]
    return updates
