"""Hot-loop kernels: compiled extension when available, Python otherwise.

Set VORTEX_PURE_PYTHON=1 to force the fallback (mainly for benchmarking
and for verifying that both paths solve to the same optimum).
"""

import os

if os.environ.get("VORTEX_PURE_PYTHON", "0") not in ("", "0"):
    from ._dualcd_py import dual_cd_epoch

    KERNEL_BACKEND = "python"
else:
    try:
        from ._dualcd import dual_cd_epoch

        KERNEL_BACKEND = "compiled"
    except ImportError:
        from ._dualcd_py import dual_cd_epoch

        KERNEL_BACKEND = "python"

__all__ = ["dual_cd_epoch", "KERNEL_BACKEND"]
