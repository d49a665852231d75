"""Build script for the optional compiled kernels.

The package works without the extension (a numpy fallback is selected at
import time); building it makes the turbo receiver roughly an order of
magnitude faster, which the Monte Carlo sweeps rely on.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    import numpy as np

    extensions = cythonize(
        [
            Extension(
                "voxmodem.kernels._core",
                sources=["src/voxmodem/kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
