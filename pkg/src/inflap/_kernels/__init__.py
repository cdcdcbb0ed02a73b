"""Kernel selection: compiled Cython core when available, pure Python twin
otherwise.

Set ``INFLAP_PURE_PYTHON=1`` to force the fallback (used by the kernel
benchmark and equivalence tests).  Both implementations perform the same
floating-point operations in the same order.
"""

import os

if os.environ.get("INFLAP_PURE_PYTHON", "") == "1":
    from inflap._kernels._py import *  # noqa: F401,F403
    USING_COMPILED = False
else:
    try:
        from inflap._kernels._cy import *  # noqa: F401,F403
        USING_COMPILED = True
    except ImportError:
        from inflap._kernels._py import *  # noqa: F401,F403
        USING_COMPILED = False
