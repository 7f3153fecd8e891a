"""Kernel backend selection.

The compiled Cython module is used when it was built; otherwise the numpy
fallback is loaded. Setting ``SPTFORGE_PURE_PYTHON=1`` forces the fallback.
"""

import os

if os.environ.get("SPTFORGE_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as _impl

    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _pykernels as _impl

        BACKEND = "python"

apply_1q = _impl.apply_1q
apply_2q = _impl.apply_2q
outer_1q = _impl.outer_1q
pauli_expectation = _impl.pauli_expectation
apply_pauli = _impl.apply_pauli
run_program = _impl.run_program
adjoint_program = _impl.adjoint_program

__all__ = ["BACKEND", "apply_1q", "apply_2q", "outer_1q", "pauli_expectation", "apply_pauli", "run_program", "adjoint_program"]
