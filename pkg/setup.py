import os

import numpy as np
from setuptools import Extension, setup

# The compiled exchange kernel is optional; the package falls back to pure Python.
try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("TOKENWEALTH_NO_EXT"):
    extensions = [
        Extension(
            "tokenwealth.kinetic._ckernel",
            ["src/tokenwealth/kinetic/_ckernel.pyx"],
            include_dirs=[np.get_include()],
            # no fast-math / fp contraction: results must match the Python kernel bit for bit
            extra_compile_args=["-O3", "-ffp-contract=off"],
        )
    ]
    ext_modules = cythonize(
        extensions,
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )

setup(ext_modules=ext_modules)
