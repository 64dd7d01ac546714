"""Build script: compiles the optional Cython kernels.

The package works without the extension (a numpy fallback is selected at
import time), so any build failure here is downgraded to a warning.
"""

import sys

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    extensions = cythonize(
        [
            Extension(
                "r2dn._kernels._sweep",
                sources=["src/r2dn/_kernels/_sweep.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"warning: skipping Cython kernels ({exc})", file=sys.stderr)
    extensions = []

setup(ext_modules=extensions)
