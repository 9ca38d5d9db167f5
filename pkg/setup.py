"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-Python reference backend is
selected at import time); building it is strongly recommended for the
system-level experiments.  `python setup.py build_ext --inplace` or a normal
pip install both try to compile it and fall back gracefully if no compiler
is available.
"""

import numpy
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "cfsync.kernels._speedups",
                ["src/cfsync/kernels/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
