"""Build script for the compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), but the hot loops are a lot faster with it. Building needs a
C compiler, Cython, and numpy headers; `pip install -e . --no-build-isolation`
uses whatever is already installed.
"""
from setuptools import Extension, setup

import numpy as np
from Cython.Build import cythonize

extensions = [
    Extension(
        "evotrade._kernels",
        ["src/evotrade/_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
