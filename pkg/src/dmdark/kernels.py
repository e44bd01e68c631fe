"""Backend selection for the Kerr kernels.

The compiled extension is used when it was built; otherwise the numpy
implementation is loaded. Setting ``DMDARK_PURE_PYTHON=1`` forces the
fallback (useful for benchmarking and for checking the two agree).
"""

import os

if os.environ.get("DMDARK_PURE_PYTHON", "") not in ("", "0"):
    from dmdark._kernels_py import coupled_kerr_exact, coupled_kerr_rk4, spm_phase

    BACKEND = "python"
else:
    try:
        from dmdark._kernels import coupled_kerr_exact, coupled_kerr_rk4, spm_phase

        BACKEND = "cython"
    except ImportError:  # extension not built
        from dmdark._kernels_py import coupled_kerr_exact, coupled_kerr_rk4, spm_phase

        BACKEND = "python"

__all__ = ["BACKEND", "coupled_kerr_exact", "coupled_kerr_rk4", "spm_phase"]
