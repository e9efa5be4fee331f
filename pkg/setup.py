"""Build script for the optional compiled kernels.

The simulator runs fine without the extension: ``fedshield.kernels`` selects a
NumPy fallback at import time when ``fedshield._ckernels`` is missing. Set
FEDSHIELD_SKIP_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("FEDSHIELD_SKIP_EXT", "") not in ("1", "true", "yes"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "fedshield._ckernels",
                    ["src/fedshield/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
