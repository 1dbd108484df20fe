"""Build the optional compiled core.

The pure-Python fallback in ``splinestab._pycore`` is used whenever the
extension is missing, so a failed compile is not fatal.
"""
import os

import numpy
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SPLINESTAB_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "splinestab._core",
                    ["src/splinestab/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    # no -ffast-math / -march=native: results must match the fallback
                    extra_compile_args=["-O3", "-fopenmp", "-ffp-contract=off"],
                    extra_link_args=["-fopenmp"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
