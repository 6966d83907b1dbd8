"""Build the optional Cython core.

If Cython or a C compiler is unavailable the package still installs and
falls back to the numpy implementation in ``poshawkes._pycore``.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("POSHAWKES_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "poshawkes._core",
                    ["src/poshawkes/_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
