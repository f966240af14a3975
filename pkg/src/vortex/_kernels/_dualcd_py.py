"""Pure-Python twin of the compiled dual coordinate descent epoch.

Same update rule and traversal as _dualcd.pyx; used when the extension is
unavailable (or forced via VORTEX_PURE_PYTHON=1).  Roughly two orders of
magnitude slower, see benchmarks/bench_kernels.py.
"""

import numpy as np


def dual_cd_epoch(x, y, row_sq_norms, alpha, w, order, penalty):
    updates = 0
    for i in order:
        row = x[i]
        grad = y[i] * np.dot(w, row) - 1.0

        if alpha[i] == 0.0:
            projected = grad if grad < 0.0 else 0.0
        elif alpha[i] == penalty:
            projected = grad if grad > 0.0 else 0.0
        else:
            projected = grad

        if projected != 0.0:
            old = alpha[i]
            new = min(max(old - grad / row_sq_norms[i], 0.0), penalty)
            alpha[i] = new
            step = (new - old) * y[i]
            if step != 0.0:
                updates += 1
                w += step * row
    return updates
